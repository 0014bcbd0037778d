//! Deterministic 1-D reference values for the smoothed log-objective and its
//! score: composite Simpson over the data axis, Gauss–Hermite over the noise.

use ndarray::{Array2, ArrayView2};
use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::schedule::{Interpolant, LinearInterpolant};
use crate::scorefield::{velocity_from_posterior_mean, ScoreSource};

pub const DEFAULT_INTERVALS: usize = 1 << 14;
pub const DEFAULT_HERMITE_NODES: usize = 64;

/// Physicists' Gauss–Hermite rule: `int e^{-z^2} g(z) dz ~ sum w_k g(z_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Golub–Welsch: eigenvalues of the Jacobi matrix with off-diagonal
/// `sqrt(k / 2)` are the nodes; weights are `sqrt(pi)` times the squared first
/// eigenvector components.
pub fn gauss_hermite(n: usize) -> GaussHermite {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    GaussHermite {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

impl GaussHermite {
    /// `E[g(eps)]` for `eps ~ N(0, 1)`.
    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        let c = std::f64::consts::SQRT_2;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| w * g(c * z))
            .sum::<f64>()
            / std::f64::consts::PI.sqrt()
    }
}

/// Composite Simpson nodes and weights on `[a, b]` with an even number of
/// intervals.
pub fn simpson_rule(a: f64, b: f64, intervals: usize) -> (Vec<f64>, Vec<f64>) {
    let h = (b - a) / intervals as f64;
    let nodes = (0..=intervals).map(|i| a + i as f64 * h).collect();
    let weights = (0..=intervals)
        .map(|i| {
            let c = if i == 0 || i == intervals {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect();
    (nodes, weights)
}

/// Unnormalized 1-D data density `f` on `[lower, upper]`, discretized for
/// exact-as-possible evaluation of `p_t(y) = int N(y; alpha x, sigma^2) f(x) dx`.
#[derive(Debug, Clone)]
pub struct QuadratureDensity {
    nodes: Vec<f64>,
    /// `log(simpson weight * f(node))`; nodes with `f = 0` are dropped.
    log_w: Vec<f64>,
    hermite: GaussHermite,
    interp: LinearInterpolant,
}

impl QuadratureDensity {
    pub fn new(f: impl Fn(f64) -> f64, lower: f64, upper: f64) -> Result<Self> {
        Self::with_resolution(f, lower, upper, DEFAULT_INTERVALS, DEFAULT_HERMITE_NODES)
    }

    pub fn with_resolution(f: impl Fn(f64) -> f64, lower: f64, upper: f64, intervals: usize, hermite_nodes: usize) -> Result<Self> {
        if intervals < 2 || intervals % 2 != 0 || !(upper > lower) || hermite_nodes == 0 {
            return Err(Error::invalid("quadrature needs an even interval count and lower < upper"));
        }
        let (xs, ws) = simpson_rule(lower, upper, intervals);
        let mut nodes = Vec::with_capacity(xs.len());
        let mut log_w = Vec::with_capacity(xs.len());
        for (x, w) in xs.into_iter().zip(ws) {
            let fx = f(x);
            if !(fx >= 0.0) || !fx.is_finite() {
                return Err(Error::invalid(format!("density must be finite and non-negative, f({x}) = {fx}")));
            }
            if fx > 0.0 {
                nodes.push(x);
                log_w.push((w * fx).ln());
            }
        }
        if nodes.is_empty() {
            return Err(Error::invalid("density vanishes on the whole interval"));
        }
        Ok(Self {
            nodes,
            log_w,
            hermite: gauss_hermite(hermite_nodes),
            interp: LinearInterpolant,
        })
    }

    /// Log kernel terms `log w_j + log N(y; alpha x_j, sigma^2)` and their max.
    fn terms(&self, y: f64, t: f64) -> (Vec<f64>, f64) {
        let (a, s) = (self.interp.alpha(t), self.interp.sigma(t));
        let norm = -0.5 * (2.0 * std::f64::consts::PI * s * s).ln();
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.log_w)
            .map(|(x, lw)| lw + norm - (y - a * x).powi(2) / (2.0 * s * s))
            .collect();
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (terms, max)
    }

    pub fn log_pt(&self, y: f64, t: f64) -> f64 {
        let (terms, max) = self.terms(y, t);
        max + terms.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
    }

    /// `(E[x | x_t = y], E[(alpha x - y) / sigma | x_t = y])`.
    fn moments(&self, y: f64, t: f64) -> (f64, f64) {
        let (a, s) = (self.interp.alpha(t), self.interp.sigma(t));
        let (terms, max) = self.terms(y, t);
        let (mut z, mut mx, mut ms) = (0.0, 0.0, 0.0);
        for (x, v) in self.nodes.iter().zip(terms) {
            let r = (v - max).exp();
            z += r;
            mx += r * x;
            ms += r * (a * x - y) / s;
        }
        (mx / z, ms / z)
    }

    pub fn posterior_mean(&self, y: f64, t: f64) -> f64 {
        self.moments(y, t).0
    }

    /// `sigma_t * d/dy log p_t(y)`.
    pub fn sigma_score(&self, y: f64, t: f64) -> f64 {
        self.moments(y, t).1
    }

    pub fn score(&self, y: f64, t: f64) -> f64 {
        self.sigma_score(y, t) / self.interp.sigma(t)
    }

    /// `E_eps[log p_t(alpha x + sigma eps)]`, the smoothed log-objective up to
    /// an additive constant.
    pub fn log_objective(&self, x: f64, t: f64) -> f64 {
        let (a, s) = (self.interp.alpha(t), self.interp.sigma(t));
        self.hermite.expect(|e| self.log_pt(a * x + s * e, t))
    }
}

/// Quadrature reference for the smoothed log-objective at `(x, t)`.
pub fn quadrature_log_objective(density: &QuadratureDensity, x: f64, t: f64) -> f64 {
    density.log_objective(x, t)
}

impl ScoreSource for QuadratureDensity {
    fn dim(&self) -> usize {
        1
    }

    fn interpolant(&self) -> &dyn Interpolant {
        &self.interp
    }

    fn velocity_batch(&self, x_t: ArrayView2<f64>, t: f64) -> Result<Array2<f64>> {
        Ok(x_t.mapv(|y| velocity_from_posterior_mean(&self.interp, &[self.posterior_mean(y, t)], &[y], t)[0]))
    }

    fn sigma_score_batch(&self, x_t: ArrayView2<f64>, t: f64) -> Result<Array2<f64>> {
        Ok(x_t.mapv(|y| self.sigma_score(y, t)))
    }

    fn score_batch(&self, x_t: ArrayView2<f64>, t: f64) -> Result<Array2<f64>> {
        let s = self.interp.sigma(t);
        if !(s > 0.0) {
            return Err(Error::SingularScale {
                t,
                reason: "sigma_t = 0, the score is undefined",
            });
        }
        Ok(x_t.mapv(|y| self.sigma_score(y, t) / s))
    }

    fn posterior_mean_batch(&self, x_t: ArrayView2<f64>, t: f64) -> Result<Array2<f64>> {
        Ok(x_t.mapv(|y| self.posterior_mean(y, t)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn hermite_moments() {
        let gh = gauss_hermite(64);
        assert!((gh.weights.iter().sum::<f64>() - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        assert!((gh.expect(|e| e * e) - 1.0).abs() < 1e-12);
        assert!((gh.expect(|e| e.powi(4)) - 3.0).abs() < 1e-11);
        assert!(gh.expect(|e| e.powi(3)).abs() < 1e-12);
        assert!((gh.expect(|e| (0.5 * e).cos()) - (-0.125f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn simpson_integrates_cubics_exactly() {
        let (x, w) = simpson_rule(-1.0, 2.0, 6);
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * (x * x * x - x + 2.0)).sum();
        assert!((v - (15.0 / 4.0 - 1.5 + 6.0)).abs() < 1e-12);
    }

    #[test]
    fn uniform_density_matches_closed_form() {
        // f = 1 on [-1, 1] (unnormalized): p_t(y) = (Phi((y + alpha)/sigma) - Phi((y - alpha)/sigma)) / alpha.
        let q = QuadratureDensity::new(|_| 1.0, -1.0, 1.0).unwrap();
        let nrm = Normal::new(0.0, 1.0).unwrap();
        for &t in &[0.3, 0.7, 0.99] {
            let (a, s) = (1.0 - t, t);
            // Written in the lower tail (by symmetry) to avoid cancellation for large |y|.
            let exact = |y: f64| ((nrm.cdf((a - y.abs()) / s) - nrm.cdf((-a - y.abs()) / s)) / a).ln();
            for &y in &[-0.8, 0.0, 0.35, 1.2] {
                assert!((q.log_pt(y, t) - exact(y)).abs() < 1e-9, "t={t} y={y}: {} vs {}", q.log_pt(y, t), exact(y));
            }
            let gh = gauss_hermite(64);
            for &x in &[-0.9, 0.4] {
                let reference = gh.expect(|e| exact(a * x + s * e)) - gh.expect(|e| exact(s * e));
                let got = q.log_objective(x, t) - q.log_objective(0.0, t);
                assert!((got - reference).abs() < 1e-9);
            }
        }
        // Heavy smoothing: nearly flat in x, and symmetric.
        let t = 0.99;
        let d = q.log_objective(0.7, t) - q.log_objective(0.0, t);
        assert!(d.abs() < 1e-4);
        assert!((q.log_objective(-0.7, t) - q.log_objective(0.7, t)).abs() < 1e-12);
    }

    #[test]
    fn gaussian_density_gradient_closed_form() {
        let (mu, s2) = (0.1f64, 0.04f64);
        let q = QuadratureDensity::new(|x| (-(x - mu).powi(2) / (2.0 * s2)).exp(), -2.0, 2.0).unwrap();
        let h = 1e-4;
        for &t in &[0.2, 0.5, 0.8] {
            let (a, s) = (1.0 - t, t);
            for &x in &[-0.6, 0.1, 0.5] {
                let fd = (q.log_objective(x + h, t) - q.log_objective(x - h, t)) / (2.0 * h);
                let exact = -a * a * (x - mu) / (a * a * s2 + s * s);
                assert!((fd - exact).abs() < 1e-4, "t={t} x={x}: {fd} vs {exact}");
            }
            let y = 0.3;
            let exact_score = -(y - a * mu) / (a * a * s2 + s * s);
            assert!((q.score(y, t) - exact_score).abs() < 1e-8);
        }
    }

    #[test]
    fn score_source_forms_agree() {
        let q = QuadratureDensity::with_resolution(|x| 1.0 + x * x, -1.0, 1.0, 2048, 32).unwrap();
        let ys = ndarray::arr2(&[[-0.5], [0.2]]);
        let t = 0.4;
        let v = q.velocity_batch(ys.view(), t).unwrap();
        let sc = q.score_batch(ys.view(), t).unwrap();
        for i in 0..2 {
            let via_v = crate::scorefield::score_from_velocity(&LinearInterpolant, &[v[[i, 0]]], &[ys[[i, 0]]], t).unwrap()[0];
            assert!((via_v - sc[[i, 0]]).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_density() {
        assert!(QuadratureDensity::new(|_| 0.0, -1.0, 1.0).is_err());
        assert!(QuadratureDensity::new(|_| -1.0, -1.0, 1.0).is_err());
        assert!(QuadratureDensity::with_resolution(|_| 1.0, -1.0, 1.0, 3, 8).is_err());
    }
}
