//! Conversions between the velocity field, the posterior mean and the score
//! of the diffused density.

use crate::error::{Error, Result};
use crate::schedule::Interpolant;

fn check_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

fn determinant(interp: &dyn Interpolant, t: f64) -> Result<f64> {
    let det = interp.determinant(t);
    if det == 0.0 || !det.is_finite() {
        return Err(Error::SingularScale {
            t,
            reason: "alpha' sigma - alpha sigma' vanishes",
        });
    }
    Ok(det)
}

/// `E[x | x_t] = (sigma v - sigma' x_t) / (alpha' sigma - alpha sigma')`;
/// `x_t - t v` for the linear schedule.
pub fn posterior_mean(interp: &dyn Interpolant, v: &[f64], x_t: &[f64], t: f64) -> Result<Vec<f64>> {
    check_len(x_t, v)?;
    let det = determinant(interp, t)?;
    let (s, ds) = (interp.sigma(t), interp.dsigma(t));
    Ok(v.iter().zip(x_t).map(|(vi, xi)| (s * vi - ds * xi) / det).collect())
}

/// `sigma_t * score = (alpha v - alpha' x_t) / (alpha' sigma - alpha sigma')`.
///
/// Equal to `(alpha m - x_t) / sigma` with `m` the posterior mean, but written
/// directly in `v` to avoid the cancellation in `alpha m - x_t` at small `t`.
/// Finite on the whole closed interval, including `t = 1`.
pub fn sigma_score_from_velocity(interp: &dyn Interpolant, v: &[f64], x_t: &[f64], t: f64) -> Result<Vec<f64>> {
    check_len(x_t, v)?;
    let det = determinant(interp, t)?;
    let (a, da) = (interp.alpha(t), interp.dalpha(t));
    Ok(v.iter().zip(x_t).map(|(vi, xi)| (a * vi - da * xi) / det).collect())
}

/// `score = sigma^-1 (alpha v - alpha' x_t) / (alpha' sigma - alpha sigma')`;
/// `-((1 - t) v + x_t) / t` for the linear schedule.
pub fn score_from_velocity(interp: &dyn Interpolant, v: &[f64], x_t: &[f64], t: f64) -> Result<Vec<f64>> {
    let s = interp.sigma(t);
    if !(s > 0.0) {
        return Err(Error::SingularScale {
            t,
            reason: "sigma_t = 0, the score is undefined",
        });
    }
    Ok(sigma_score_from_velocity(interp, v, x_t, t)?
        .into_iter()
        .map(|g| g / s)
        .collect())
}

/// `score = (alpha / sigma^2) (m - x_t / alpha)`. Undefined at `alpha = 0`,
/// where [`score_from_velocity`] must be used instead.
pub fn score_from_posterior_mean(interp: &dyn Interpolant, m: &[f64], x_t: &[f64], t: f64) -> Result<Vec<f64>> {
    check_len(x_t, m)?;
    let (a, s) = (interp.alpha(t), interp.sigma(t));
    if !(a > 0.0) {
        return Err(Error::SingularScale {
            t,
            reason: "alpha_t = 0; use score_from_velocity",
        });
    }
    if !(s > 0.0) {
        return Err(Error::SingularScale {
            t,
            reason: "sigma_t = 0, the score is undefined",
        });
    }
    Ok(m.iter().zip(x_t).map(|(mi, xi)| a / (s * s) * (mi - xi / a)).collect())
}

/// Velocity implied by a posterior mean: `v = alpha' m + sigma' (x_t - alpha m) / sigma`.
/// At `sigma = 0` the noise is independent of `x_t`, so `v = alpha' x_t`.
pub fn velocity_from_posterior_mean(interp: &dyn Interpolant, m: &[f64], x_t: &[f64], t: f64) -> Vec<f64> {
    let (a, s, da, ds) = (interp.alpha(t), interp.sigma(t), interp.dalpha(t), interp.dsigma(t));
    if s == 0.0 {
        return x_t.iter().map(|x| da * x).collect();
    }
    m.iter().zip(x_t).map(|(mi, xi)| da * mi + ds * (xi - a * mi) / s).collect()
}
