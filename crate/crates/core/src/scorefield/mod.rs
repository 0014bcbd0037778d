//! Vector-field model, its training, and the conversions to scores and
//! posterior means.

pub mod convert;
pub mod mlp;
pub mod model;
pub mod oracle;
pub mod sde;
pub mod train;

use ndarray::{Array2, ArrayView2, Zip};

pub use convert::{
    posterior_mean, score_from_posterior_mean, score_from_velocity, sigma_score_from_velocity,
    velocity_from_posterior_mean,
};
pub use mlp::Activation;
pub use model::{Architecture, Preconditioner, VectorFieldModel};
pub use oracle::GaussianMixtureOracle;
pub use sde::{sample_reverse_sde, Diffusion, SdeConfig};
pub use train::{
    parameter_gradient_check, parameter_gradient_check_with, train_flow_matching, LossWeights, TrainBatch,
    TrainConfig, TrainReport,
};

use crate::error::{Error, Result};
use crate::schedule::Interpolant;

/// Anything that yields the velocity of the diffused data distribution, and
/// from it scores and posterior means. Rows of the batch arguments are points.
pub trait ScoreSource: Send + Sync {
    fn dim(&self) -> usize;
    fn interpolant(&self) -> &dyn Interpolant;
    fn velocity_batch(&self, x_t: ArrayView2<f64>, t: f64) -> Result<Array2<f64>>;

    /// `sigma_t * score`, finite for every `t` in `[0, 1]`.
    fn sigma_score_batch(&self, x_t: ArrayView2<f64>, t: f64) -> Result<Array2<f64>> {
        let interp = self.interpolant();
        let det = nonzero_determinant(interp, t)?;
        let (a, da) = (interp.alpha(t), interp.dalpha(t));
        let v = self.velocity_batch(x_t, t)?;
        Ok(Zip::from(&v).and(&x_t).map_collect(|&vi, &xi| (a * vi - da * xi) / det))
    }

    fn score_batch(&self, x_t: ArrayView2<f64>, t: f64) -> Result<Array2<f64>> {
        let s = self.interpolant().sigma(t);
        if !(s > 0.0) {
            return Err(Error::SingularScale {
                t,
                reason: "sigma_t = 0, the score is undefined",
            });
        }
        Ok(self.sigma_score_batch(x_t, t)? / s)
    }

    fn posterior_mean_batch(&self, x_t: ArrayView2<f64>, t: f64) -> Result<Array2<f64>> {
        let interp = self.interpolant();
        let det = nonzero_determinant(interp, t)?;
        let (s, ds) = (interp.sigma(t), interp.dsigma(t));
        let v = self.velocity_batch(x_t, t)?;
        Ok(Zip::from(&v).and(&x_t).map_collect(|&vi, &xi| (s * vi - ds * xi) / det))
    }
}

fn nonzero_determinant(interp: &dyn Interpolant, t: f64) -> Result<f64> {
    let det = interp.determinant(t);
    if det == 0.0 || !det.is_finite() {
        return Err(Error::SingularScale {
            t,
            reason: "alpha' sigma - alpha sigma' vanishes",
        });
    }
    Ok(det)
}
