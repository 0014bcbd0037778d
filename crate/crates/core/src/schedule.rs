//! Diffusion interpolants, the annealing t-sequence, and the Gaussian kernels
//! of the forward process `x_t = alpha_t x + sigma_t eps`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Noise schedule `(alpha_t, sigma_t)` on `t in [0, 1]`.
///
/// Implementations must satisfy `alpha(0) = sigma(1) = 1`,
/// `alpha(1) = sigma(0) = 0`, with `alpha` non-increasing and `sigma`
/// non-decreasing.
pub trait Interpolant: fmt::Debug + Send + Sync {
    /// Stable identifier, written into checkpoints.
    fn name(&self) -> &'static str;
    fn alpha(&self, t: f64) -> f64;
    fn sigma(&self, t: f64) -> f64;
    fn dalpha(&self, t: f64) -> f64;
    fn dsigma(&self, t: f64) -> f64;

    /// `dalpha * sigma - alpha * dsigma`, the determinant shared by the
    /// velocity/score/posterior-mean conversions.
    fn determinant(&self, t: f64) -> f64 {
        self.dalpha(t) * self.sigma(t) - self.alpha(t) * self.dsigma(t)
    }
}

/// `alpha_t = 1 - t`, `sigma_t = t`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LinearInterpolant;

impl Interpolant for LinearInterpolant {
    fn name(&self) -> &'static str {
        "linear"
    }
    fn alpha(&self, t: f64) -> f64 {
        1.0 - t
    }
    fn sigma(&self, t: f64) -> f64 {
        t
    }
    fn dalpha(&self, _t: f64) -> f64 {
        -1.0
    }
    fn dsigma(&self, _t: f64) -> f64 {
        1.0
    }
}

/// `alpha_t = cos(pi t / 2)`, `sigma_t = sin(pi t / 2)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrigonometricInterpolant;

impl Interpolant for TrigonometricInterpolant {
    fn name(&self) -> &'static str {
        "trigonometric"
    }
    fn alpha(&self, t: f64) -> f64 {
        if t >= 1.0 {
            0.0
        } else {
            (FRAC_PI_2 * t).cos()
        }
    }
    fn sigma(&self, t: f64) -> f64 {
        (FRAC_PI_2 * t).sin()
    }
    fn dalpha(&self, t: f64) -> f64 {
        -FRAC_PI_2 * (FRAC_PI_2 * t).sin()
    }
    fn dsigma(&self, t: f64) -> f64 {
        FRAC_PI_2 * (FRAC_PI_2 * t).cos()
    }
}

pub fn linear_interpolant() -> LinearInterpolant {
    LinearInterpolant
}

/// Resolve an interpolant from its checkpoint/config name.
pub fn interpolant_by_name(name: &str) -> Option<Arc<dyn Interpolant>> {
    match name {
        "linear" => Some(Arc::new(LinearInterpolant)),
        "trigonometric" => Some(Arc::new(TrigonometricInterpolant)),
        _ => None,
    }
}

/// Exponentially decreasing annealing schedule `t_0 = 1 > t_1 > ... > t_TN = t_end`.
#[derive(Debug, Clone, PartialEq)]
pub struct TSequence {
    pub tn: usize,
    pub t_end: f64,
    pub gamma: f64,
    pub values: Vec<f64>,
}

impl TSequence {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }
}

/// Builds the geometric sequence with ratio `gamma = t_end^(1/TN)`.
///
/// `TN = 0` is accepted as the degenerate single-scale schedule `[1]`; the
/// outer loop then only performs the first-scale initialization.
pub fn build_t_sequence(tn: usize, t_end: f64) -> Result<TSequence> {
    if !(t_end > 0.0 && t_end < 1.0) {
        return Err(Error::invalid(format!("t_end must lie in (0,1), got {t_end}")));
    }
    if tn == 0 {
        return Ok(TSequence {
            tn,
            t_end: 1.0,
            gamma: 1.0,
            values: vec![1.0],
        });
    }
    let gamma = (t_end.ln() / tn as f64).exp();
    let mut values = Vec::with_capacity(tn + 1);
    values.push(1.0);
    for i in 0..tn {
        values.push(gamma * values[i]);
    }
    Ok(TSequence {
        tn,
        t_end,
        gamma,
        values,
    })
}

/// Same as [`build_t_sequence`] but rejects the degenerate `TN = 0`.
pub fn build_t_sequence_strict(tn: usize, t_end: f64) -> Result<TSequence> {
    if tn == 0 {
        return Err(Error::invalid("TN must be at least 1"));
    }
    build_t_sequence(tn, t_end)
}

fn sq_dist_scaled(a: &[f64], b: &[f64], b_scale: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.iter()
        .zip(b)
        .map(|(&ai, &bi)| {
            let d = ai - b_scale * bi;
            d * d
        })
        .sum())
}

/// `log N(x_t; alpha_t x, sigma_t^2 I)`.
pub fn log_forward_density(interp: &dyn Interpolant, x_t: &[f64], x: &[f64], t: f64) -> Result<f64> {
    let sigma = interp.sigma(t);
    if sigma <= 0.0 {
        return Err(Error::DegenerateKernel {
            t,
            reason: "sigma_t = 0",
        });
    }
    let alpha = interp.alpha(t);
    let d2 = sq_dist_scaled(x_t, x, alpha)?;
    let n = x.len() as f64;
    Ok(-0.5 * n * (2.0 * PI * sigma * sigma).ln() - d2 / (2.0 * sigma * sigma))
}

pub fn forward_density(interp: &dyn Interpolant, x_t: &[f64], x: &[f64], t: f64) -> Result<f64> {
    log_forward_density(interp, x_t, x, t).map(f64::exp)
}

/// `log N(x; x_t / alpha_t, (sigma_t / alpha_t)^2 I)`.
pub fn log_inverse_density(interp: &dyn Interpolant, x: &[f64], x_t: &[f64], t: f64) -> Result<f64> {
    let alpha = interp.alpha(t);
    let sigma = interp.sigma(t);
    if alpha <= 0.0 {
        return Err(Error::DegenerateKernel {
            t,
            reason: "alpha_t = 0, posterior undefined without a data prior",
        });
    }
    if sigma <= 0.0 {
        return Err(Error::DegenerateKernel {
            t,
            reason: "sigma_t = 0",
        });
    }
    if x.len() != x_t.len() {
        return Err(Error::DimensionMismatch {
            expected: x_t.len(),
            got: x.len(),
        });
    }
    let scale = sigma / alpha;
    let d2: f64 = x
        .iter()
        .zip(x_t)
        .map(|(&xi, &xti)| {
            let d = xi - xti / alpha;
            d * d
        })
        .sum();
    let n = x.len() as f64;
    Ok(-0.5 * n * (2.0 * PI * scale * scale).ln() - d2 / (2.0 * scale * scale))
}

pub fn inverse_density(interp: &dyn Interpolant, x: &[f64], x_t: &[f64], t: f64) -> Result<f64> {
    log_inverse_density(interp, x, x_t, t).map(f64::exp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn quad(interp: &dyn Interpolant, t: f64) -> (f64, f64, f64, f64) {
        (interp.alpha(t), interp.sigma(t), interp.dalpha(t), interp.dsigma(t))
    }

    #[test]
    fn linear_boundary_and_interior_values() {
        let lin = linear_interpolant();
        assert_eq!(quad(&lin, 0.0), (1.0, 0.0, -1.0, 1.0));
        assert_eq!(quad(&lin, 1.0), (0.0, 1.0, -1.0, 1.0));
        let (a, s, da, ds) = quad(&lin, 0.3);
        assert!((a - 0.7).abs() < 1e-15 && (s - 0.3).abs() < 1e-15);
        assert_eq!((da, ds), (-1.0, 1.0));
    }

    #[test]
    fn interpolants_satisfy_boundaries_monotonicity_and_derivatives() {
        let all: [&dyn Interpolant; 2] = [&LinearInterpolant, &TrigonometricInterpolant];
        for interp in all {
            assert_eq!(interp.alpha(0.0), 1.0);
            assert_eq!(interp.sigma(1.0), 1.0);
            assert_eq!(interp.alpha(1.0), 0.0);
            assert_eq!(interp.sigma(0.0), 0.0);
            let h = 1e-4;
            let mut prev = (interp.alpha(0.0), interp.sigma(0.0));
            for k in 1..1000 {
                let t = k as f64 / 1000.0;
                let cur = (interp.alpha(t), interp.sigma(t));
                assert!(cur.0 <= prev.0 && cur.1 >= prev.1, "{} not monotone at {t}", interp.name());
                prev = cur;
                if t > 2.0 * h && t < 1.0 - 2.0 * h {
                    let fd_a = (interp.alpha(t + h) - interp.alpha(t - h)) / (2.0 * h);
                    let fd_s = (interp.sigma(t + h) - interp.sigma(t - h)) / (2.0 * h);
                    assert!((interp.dalpha(t) - fd_a).abs() < 10.0 * h * h);
                    assert!((interp.dsigma(t) - fd_s).abs() < 10.0 * h * h);
                }
            }
        }
    }

    #[test]
    fn t_sequence_matches_closed_form_gamma() {
        let seq = build_t_sequence(30, 2e-3).unwrap();
        // exp(ln(0.002)/30)
        assert!((seq.gamma - 0.812_900).abs() < 1e-5, "gamma {}", seq.gamma);
        assert_eq!(seq.values.len(), 31);
        assert_eq!(seq.values[0], 1.0);
        assert!(((seq.values[30] - 2e-3) / 2e-3).abs() < 1e-9);

        let seq = build_t_sequence(67, 1e-3).unwrap();
        assert!((seq.gamma - 0.902_04).abs() < 1e-4, "gamma {}", seq.gamma);

        let seq = build_t_sequence(1, 0.5).unwrap();
        assert_eq!(seq.values, vec![1.0, 0.5]);
    }

    #[test]
    fn t_sequence_is_geometric() {
        let seq = build_t_sequence(30, 2e-3).unwrap();
        for w in seq.values.windows(2) {
            assert!(w[1] < w[0]);
            assert_eq!(w[1], seq.gamma * w[0]);
            assert!((w[1] / w[0] - seq.gamma).abs() / seq.gamma < 1e-12);
        }
    }

    #[test]
    fn t_sequence_rejects_bad_inputs() {
        assert!(build_t_sequence_strict(0, 0.5).is_err());
        assert!(build_t_sequence(0, 0.5).is_ok());
        assert!(build_t_sequence(5, 0.0).is_err());
        assert!(build_t_sequence(5, 1.0).is_err());
        assert!(build_t_sequence(5, -0.2).is_err());
    }

    #[test]
    fn density_examples() {
        let lin = LinearInterpolant;
        // alpha = sigma = 0.5 at t = 0.5
        let p = forward_density(&lin, &[0.0], &[0.0], 0.5).unwrap();
        assert!((p - (2.0 * PI * 0.25f64).powf(-0.5)).abs() < 1e-12);
        assert!((p - 0.797_884_560_8).abs() < 1e-9);

        let q = inverse_density(&lin, &[1.0], &[0.5], 0.5).unwrap();
        assert!((q - 0.398_942_280_4).abs() < 1e-9);

        // Maximum at x_t = alpha x.
        let t = 0.3;
        let x = [0.2, -0.4, 0.9];
        let xt: Vec<f64> = x.iter().map(|v| lin.alpha(t) * v).collect();
        let s = lin.sigma(t);
        let peak = forward_density(&lin, &xt, &x, t).unwrap();
        assert!((peak - (2.0 * PI * s * s).powf(-1.5)).abs() / peak < 1e-12);

        let center: Vec<f64> = xt.iter().map(|v| v / lin.alpha(t)).collect();
        let peak = inverse_density(&lin, &center, &xt, t).unwrap();
        let sc = s / lin.alpha(t);
        assert!((peak - (2.0 * PI * sc * sc).powf(-1.5)).abs() / peak < 1e-12);
    }

    #[test]
    fn forward_inverse_ratio_is_alpha_pow_n() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let n = rng.gen_range(1..=8);
            let t = rng.gen_range(0.05..0.95);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let xt: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lf = log_forward_density(&LinearInterpolant, &xt, &x, t).unwrap();
            let li = log_inverse_density(&LinearInterpolant, &x, &xt, t).unwrap();
            let ratio = (li - lf).exp();
            let expected = (1.0 - t).powi(n as i32);
            assert!((ratio - expected).abs() / expected < 1e-9);
        }
    }

    #[test]
    fn degenerate_kernels_error() {
        let lin = LinearInterpolant;
        assert!(matches!(
            forward_density(&lin, &[0.0], &[0.0], 0.0),
            Err(Error::DegenerateKernel { .. })
        ));
        assert!(matches!(
            inverse_density(&lin, &[0.0], &[0.0], 1.0),
            Err(Error::DegenerateKernel { .. })
        ));
        assert!(matches!(
            forward_density(&lin, &[0.0, 1.0], &[0.0], 0.5),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn registry_round_trips_names() {
        for name in ["linear", "trigonometric"] {
            assert_eq!(interpolant_by_name(name).unwrap().name(), name);
        }
        assert!(interpolant_by_name("cosine").is_none());
    }
}
