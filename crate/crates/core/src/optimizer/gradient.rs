//! Monte Carlo gradients of the smoothed log-objective and the per-scale
//! ascent loop.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::antithetic_noise;
use crate::scorefield::ScoreSource;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradConfig {
    pub monte_size: usize,
    pub lr: f64,
    pub max_steps: usize,
    /// Infinity-norm threshold on the applied step.
    pub tol: f64,
    /// Consecutive sub-threshold steps required to stop.
    pub patience: usize,
}

impl Default for GradConfig {
    fn default() -> Self {
        Self {
            monte_size: 128,
            lr: 1e-2,
            max_steps: 200,
            tol: 1e-4,
            patience: 3,
        }
    }
}

impl GradConfig {
    pub fn validate(&self) -> Result<()> {
        if self.monte_size < 2 || self.monte_size % 2 != 0 {
            return Err(Error::Config(format!("grad.monte_size must be even and >= 2, got {}", self.monte_size)));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!("grad.lr must be positive, got {}", self.lr)));
        }
        if self.patience == 0 {
            return Err(Error::Config("grad.patience must be >= 1".into()));
        }
        Ok(())
    }
}

fn perturbed(x: &[f64], eps: ArrayView2<f64>, a: f64, s: f64) -> Array2<f64> {
    let mut out = eps.to_owned() * s;
    for mut row in out.rows_mut() {
        for (d, v) in row.iter_mut().enumerate() {
            *v += a * x[d];
        }
    }
    out
}

fn check_rows(values: &Array2<f64>, eps: ArrayView2<f64>, what: &str) -> Result<()> {
    for (i, row) in values.rows().into_iter().enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite(format!("{what} at eps = {:?}", eps.row(i).to_vec())));
        }
    }
    Ok(())
}

fn check_dims(source: &dyn ScoreSource, x: &[f64], eps: ArrayView2<f64>) -> Result<()> {
    if x.len() != source.dim() || eps.ncols() != source.dim() {
        return Err(Error::DimensionMismatch {
            expected: source.dim(),
            got: if x.len() != source.dim() { x.len() } else { eps.ncols() },
        });
    }
    Ok(())
}

/// `alpha_t * mean_eps score(alpha_t x + sigma_t eps)` on a given noise batch.
/// Exactly zero when `alpha_t = 0`.
pub fn mc_gradient_with_noise(source: &dyn ScoreSource, x: &[f64], t: f64, eps: ArrayView2<f64>) -> Result<Vec<f64>> {
    check_dims(source, x, eps)?;
    let interp = source.interpolant();
    let (a, s) = (interp.alpha(t), interp.sigma(t));
    if a == 0.0 {
        return Ok(vec![0.0; x.len()]);
    }
    let scores = source.score_batch(perturbed(x, eps, a, s).view(), t)?;
    check_rows(&scores, eps, "score")?;
    let mean: Array1<f64> = scores.mean_axis(Axis(0)).expect("non-empty batch");
    Ok(mean.iter().map(|g| a * g).collect())
}

/// `mean_eps sigma_t * score(alpha_t x + sigma_t eps)` on a given noise batch:
/// the gradient rescaled by `sigma_t / alpha_t`, finite up to `t = 1`.
pub fn stable_mc_gradient_with_noise(source: &dyn ScoreSource, x: &[f64], t: f64, eps: ArrayView2<f64>) -> Result<Vec<f64>> {
    check_dims(source, x, eps)?;
    let interp = source.interpolant();
    let (a, s) = (interp.alpha(t), interp.sigma(t));
    let scores = source.sigma_score_batch(perturbed(x, eps, a, s).view(), t)?;
    check_rows(&scores, eps, "sigma * score")?;
    Ok(scores.mean_axis(Axis(0)).expect("non-empty batch").to_vec())
}

pub fn mc_gradient<R: Rng + ?Sized>(source: &dyn ScoreSource, x: &[f64], t: f64, monte_size: usize, rng: &mut R) -> Result<Vec<f64>> {
    let eps = antithetic_noise(monte_size, x.len(), rng)?;
    mc_gradient_with_noise(source, x, t, eps.view())
}

pub fn stable_mc_gradient<R: Rng + ?Sized>(
    source: &dyn ScoreSource,
    x: &[f64],
    t: f64,
    monte_size: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let eps = antithetic_noise(monte_size, x.len(), rng)?;
    stable_mc_gradient_with_noise(source, x, t, eps.view())
}

/// `x* = mean_eps E[x | x_t = eps]` at `t = 1`, clamped to the box.
pub fn initialize_first_scale<R: Rng + ?Sized>(source: &dyn ScoreSource, monte_size: usize, rng: &mut R) -> Result<Vec<f64>> {
    let eps = antithetic_noise(monte_size, source.dim(), rng)?;
    let m = source.posterior_mean_batch(eps.view(), 1.0)?;
    let mean = m.mean_axis(Axis(0)).expect("non-empty batch");
    if mean.iter().any(|v| !v.is_finite()) {
        return Err(Error::non_finite("first-scale initialization"));
    }
    Ok(mean.iter().map(|v| v.clamp(-1.0, 1.0)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AscentStep {
    pub step: usize,
    pub grad: Vec<f64>,
    pub grad_norm: f64,
    /// Infinity norm of the applied (post-clamp) step.
    pub step_norm: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AscentResult {
    pub x: Vec<f64>,
    pub steps: Vec<AscentStep>,
    pub converged: bool,
}

/// Repeats `x <- clamp(x + lr * stable_gradient)` until the step is exactly
/// zero, or stays below `tol` for `patience` consecutive steps, or
/// `max_steps` is reached.
pub fn ascend_at_scale<R: Rng + ?Sized>(
    source: &dyn ScoreSource,
    x0: &[f64],
    t: f64,
    cfg: &GradConfig,
    rng: &mut R,
) -> Result<AscentResult> {
    cfg.validate()?;
    let mut x = x0.to_vec();
    let mut steps = Vec::new();
    let mut quiet = 0;
    let mut converged = false;
    for step in 1..=cfg.max_steps {
        let g = stable_mc_gradient(source, &x, t, cfg.monte_size, rng)?;
        let next: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| (xi + cfg.lr * gi).clamp(-1.0, 1.0)).collect();
        let step_norm = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let grad_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = next;
        steps.push(AscentStep {
            step,
            grad: g,
            grad_norm,
            step_norm,
            x: x.clone(),
        });
        if step_norm == 0.0 {
            converged = true;
            break;
        }
        quiet = if step_norm < cfg.tol { quiet + 1 } else { 0 };
        if quiet >= cfg.patience {
            converged = true;
            break;
        }
    }
    Ok(AscentResult { x, steps, converged })
}
