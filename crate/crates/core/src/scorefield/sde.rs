//! Euler–Maruyama integration of the reverse-time SDE
//! `dX = [v - w/2 score] dt + sqrt(w) dW` from `t_start` down to `t_min`.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ScoreSource;
use crate::error::{Error, Result};

/// Diffusion coefficient `w_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Diffusion {
    /// `w_t = sigma_t`.
    Sigma,
    /// `w_t = 0`: the deterministic probability-flow ODE.
    Zero,
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SdeConfig {
    pub n_steps: usize,
    pub t_min: f64,
    pub diffusion: Diffusion,
}

impl Default for SdeConfig {
    fn default() -> Self {
        Self {
            n_steps: 250,
            t_min: 1e-3,
            diffusion: Diffusion::Sigma,
        }
    }
}

/// Integrates every row of `x_start` from `t_start` to `cfg.t_min` with
/// `cfg.n_steps` uniform steps:
/// `X <- X - h v + (w h / 2) score + sqrt(w h) xi`.
pub fn sample_reverse_sde<R: Rng + ?Sized>(
    source: &dyn ScoreSource,
    x_start: Array2<f64>,
    t_start: f64,
    cfg: &SdeConfig,
    rng: &mut R,
) -> Result<Array2<f64>> {
    if cfg.n_steps == 0 || !(t_start > cfg.t_min) || !(cfg.t_min > 0.0) || t_start > 1.0 {
        return Err(Error::invalid("reverse SDE needs 0 < t_min < t_start <= 1 and n_steps >= 1"));
    }
    if x_start.ncols() != source.dim() {
        return Err(Error::DimensionMismatch {
            expected: source.dim(),
            got: x_start.ncols(),
        });
    }
    let interp = source.interpolant();
    let h = (t_start - cfg.t_min) / cfg.n_steps as f64;
    let mut x = x_start;
    for k in 0..cfg.n_steps {
        let t = t_start - k as f64 * h;
        let w = match cfg.diffusion {
            Diffusion::Sigma => interp.sigma(t),
            Diffusion::Zero => 0.0,
            Diffusion::Constant(c) => c,
        };
        let v = source.velocity_batch(x.view(), t)?;
        let mut next = &x - &(v * h);
        if w > 0.0 {
            let score = source.score_batch(x.view(), t)?;
            next = next + score * (0.5 * w * h);
            let amp = (w * h).sqrt();
            next.mapv_inplace(|val| val + amp * rng.sample::<f64, _>(StandardNormal));
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite(format!("reverse SDE state at step {k} (t = {t})")));
        }
        x = next;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorefield::GaussianMixtureOracle;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn ks_normal(samples: &mut [f64]) -> f64 {
        samples.sort_by(f64::total_cmp);
        let nrm = Normal::new(0.0, 1.0).unwrap();
        let n = samples.len() as f64;
        samples
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let c = nrm.cdf(v);
                (c - i as f64 / n).abs().max((c - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn standard_normal_is_preserved() {
        let o = GaussianMixtureOracle::gaussian(vec![0.0], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let start = Array2::from_shape_fn((10_000, 1), |_| rng.sample(StandardNormal));
        let out = sample_reverse_sde(&o, start, 1.0, &SdeConfig::default(), &mut rng).unwrap();
        let mut v = out.column(0).to_vec();
        let ks = ks_normal(&mut v);
        assert!(ks < 0.02, "{ks}");
    }

    #[test]
    fn zero_diffusion_is_deterministic() {
        let o = GaussianMixtureOracle::new(vec![vec![-0.5], vec![0.5]], vec![0.01, 0.01], vec![0.5, 0.5]).unwrap();
        let start = Array2::from_shape_fn((20, 1), |(i, _)| -2.0 + 0.2 * i as f64);
        let cfg = SdeConfig {
            diffusion: Diffusion::Zero,
            ..SdeConfig::default()
        };
        let a = sample_reverse_sde(&o, start.clone(), 1.0, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = sample_reverse_sde(&o, start, 1.0, &cfg, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn two_mode_mass_ratio_recovered() {
        let (w_left, w_right) = (0.3, 0.7);
        let o = GaussianMixtureOracle::new(vec![vec![-0.5], vec![0.5]], vec![0.01, 0.01], vec![w_left, w_right]).unwrap();
        // Reference mass right of zero by Simpson quadrature of the density.
        let density = |x: f64| o.log_density(&[x], 0.0).exp();
        let (a, b, m) = (0.0, 3.0, 20_000);
        let h = (b - a) / m as f64;
        let mut right = density(a) + density(b);
        for i in 1..m {
            right += if i % 2 == 1 { 4.0 } else { 2.0 } * density(a + i as f64 * h);
        }
        right *= h / 3.0;
        let target = right / (1.0 - right);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let start = Array2::from_shape_fn((10_000, 1), |_| rng.sample(StandardNormal));
        let out = sample_reverse_sde(&o, start, 1.0, &SdeConfig::default(), &mut rng).unwrap();
        let r = out.iter().filter(|&&v| v > 0.0).count() as f64;
        let ratio = r / (out.len() as f64 - r);
        assert!((ratio / target - 1.0).abs() < 0.1, "{ratio} vs {target}");
    }

    #[test]
    fn invalid_arguments() {
        let o = GaussianMixtureOracle::gaussian(vec![0.0], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = SdeConfig::default();
        assert!(sample_reverse_sde(&o, Array2::zeros((2, 1)), 1e-4, &cfg, &mut rng).is_err());
        assert!(sample_reverse_sde(&o, Array2::zeros((2, 2)), 1.0, &cfg, &mut rng).is_err());
    }
}
