//! Closed-form Gaussian-mixture data distributions, used as exact score
//! sources for testing.

use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::ScoreSource;
use crate::error::{Error, Result};
use crate::schedule::{Interpolant, LinearInterpolant};

/// `p(x) = sum_i w_i N(x; mu_i, s_i^2 I)`. Zero variances (point masses) are
/// allowed as long as `t > 0`.
#[derive(Debug, Clone)]
pub struct GaussianMixtureOracle {
    means: Vec<Vec<f64>>,
    variances: Vec<f64>,
    weights: Vec<f64>,
    interp: Arc<dyn Interpolant>,
}

impl GaussianMixtureOracle {
    pub fn new(means: Vec<Vec<f64>>, variances: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let k = means.len();
        if k == 0 || variances.len() != k || weights.len() != k {
            return Err(Error::invalid("mixture needs matching, non-empty means/variances/weights"));
        }
        let n = means[0].len();
        if n == 0 || means.iter().any(|m| m.len() != n) {
            return Err(Error::invalid("mixture means must share a positive dimension"));
        }
        if weights.iter().any(|&w| !(w > 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("mixture weights must be positive and sum to 1"));
        }
        if variances.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("mixture variances must be finite and non-negative"));
        }
        Ok(Self {
            means,
            variances,
            weights,
            interp: Arc::new(LinearInterpolant),
        })
    }

    /// Single isotropic Gaussian `N(mean, var I)`.
    pub fn gaussian(mean: Vec<f64>, var: f64) -> Result<Self> {
        Self::new(vec![mean], vec![var], vec![1.0])
    }

    pub fn with_interpolant(mut self, interp: Arc<dyn Interpolant>) -> Self {
        self.interp = interp;
        self
    }

    pub fn components(&self) -> usize {
        self.means.len()
    }

    pub fn mean_of(&self, i: usize) -> &[f64] {
        &self.means[i]
    }

    /// Per-component `(log w_i + log N_i(x_t), total variance)`.
    fn component_terms(&self, x_t: &[f64], t: f64) -> Vec<(f64, f64)> {
        let (a, s) = (self.interp.alpha(t), self.interp.sigma(t));
        let n = x_t.len() as f64;
        self.means
            .iter()
            .zip(&self.variances)
            .zip(&self.weights)
            .map(|((mu, &var), &w)| {
                let tv = a * a * var + s * s;
                let sq: f64 = x_t.iter().zip(mu).map(|(x, m)| (x - a * m).powi(2)).sum();
                let lp = w.ln() - 0.5 * n * (2.0 * std::f64::consts::PI * tv).ln() - 0.5 * sq / tv;
                (lp, tv)
            })
            .collect()
    }

    fn responsibilities(&self, x_t: &[f64], t: f64) -> (Vec<f64>, Vec<f64>, f64) {
        let terms = self.component_terms(x_t, t);
        let max = terms.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let un: Vec<f64> = terms.iter().map(|p| (p.0 - max).exp()).collect();
        let z: f64 = un.iter().sum();
        let r = un.iter().map(|u| u / z).collect();
        (r, terms.iter().map(|p| p.1).collect(), max + z.ln())
    }

    /// `log p_t(x_t)`, via log-sum-exp.
    pub fn log_density(&self, x_t: &[f64], t: f64) -> f64 {
        self.responsibilities(x_t, t).2
    }

    /// `grad log p_t(x_t) = sum_i r_i * (-(x_t - alpha mu_i) / (alpha^2 s_i^2 + sigma^2))`.
    pub fn analytic_mixture_score(&self, x_t: &[f64], t: f64) -> Vec<f64> {
        let a = self.interp.alpha(t);
        let (r, tv, _) = self.responsibilities(x_t, t);
        let mut out = vec![0.0; x_t.len()];
        for (i, mu) in self.means.iter().enumerate() {
            for d in 0..x_t.len() {
                out[d] -= r[i] * (x_t[d] - a * mu[d]) / tv[i];
            }
        }
        out
    }

    /// `E[x | x_t] = sum_i r_i (alpha s_i^2 x_t + sigma^2 mu_i) / (alpha^2 s_i^2 + sigma^2)`.
    pub fn posterior_mean(&self, x_t: &[f64], t: f64) -> Vec<f64> {
        let (a, s) = (self.interp.alpha(t), self.interp.sigma(t));
        let (r, tv, _) = self.responsibilities(x_t, t);
        let mut out = vec![0.0; x_t.len()];
        for (i, mu) in self.means.iter().enumerate() {
            let var = self.variances[i];
            for d in 0..x_t.len() {
                out[d] += r[i] * (a * var * x_t[d] + s * s * mu[d]) / tv[i];
            }
        }
        out
    }

    /// Draws from the data distribution `p(x)`.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Array2<f64> {
        let n = self.means[0].len();
        let mut out = Array2::zeros((count, n));
        for mut row in out.rows_mut() {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut k = self.weights.len() - 1;
            for (i, w) in self.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    k = i;
                    break;
                }
            }
            let sd = self.variances[k].sqrt();
            for d in 0..n {
                row[d] = self.means[k][d] + sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
        out
    }
}

impl ScoreSource for GaussianMixtureOracle {
    fn dim(&self) -> usize {
        self.means[0].len()
    }

    fn interpolant(&self) -> &dyn Interpolant {
        self.interp.as_ref()
    }

    fn velocity_batch(&self, x_t: ArrayView2<f64>, t: f64) -> Result<Array2<f64>> {
        let mut out = Array2::zeros(x_t.raw_dim());
        for (i, row) in x_t.rows().into_iter().enumerate() {
            let x = row.to_vec();
            let m = self.posterior_mean(&x, t);
            let v = super::convert::velocity_from_posterior_mean(self.interp.as_ref(), &m, &x, t);
            out.row_mut(i).assign(&ndarray::ArrayView1::from(&v));
        }
        Ok(out)
    }

    fn sigma_score_batch(&self, x_t: ArrayView2<f64>, t: f64) -> Result<Array2<f64>> {
        let s = self.interp.sigma(t);
        let mut out = Array2::zeros(x_t.raw_dim());
        for (i, row) in x_t.rows().into_iter().enumerate() {
            let g = self.analytic_mixture_score(&row.to_vec(), t);
            for (d, v) in g.into_iter().enumerate() {
                out[[i, d]] = s * v;
            }
        }
        Ok(out)
    }

    fn score_batch(&self, x_t: ArrayView2<f64>, t: f64) -> Result<Array2<f64>> {
        let mut out = Array2::zeros(x_t.raw_dim());
        for (i, row) in x_t.rows().into_iter().enumerate() {
            let g = self.analytic_mixture_score(&row.to_vec(), t);
            out.row_mut(i).assign(&ndarray::ArrayView1::from(&g));
        }
        Ok(out)
    }

    fn posterior_mean_batch(&self, x_t: ArrayView2<f64>, t: f64) -> Result<Array2<f64>> {
        let mut out = Array2::zeros(x_t.raw_dim());
        for (i, row) in x_t.rows().into_iter().enumerate() {
            let m = self.posterior_mean(&row.to_vec(), t);
            out.row_mut(i).assign(&ndarray::ArrayView1::from(&m));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorefield::convert;

    #[test]
    fn standard_normal_score() {
        let o = GaussianMixtureOracle::gaussian(vec![0.0], 1.0).unwrap();
        // Total variance (1-t)^2 + t^2; at t = 0.5 the score is -2 x_t.
        assert!((o.analytic_mixture_score(&[0.3], 0.5)[0] + 0.6).abs() < 1e-15);
        for &t in &[0.0, 0.2, 0.7, 1.0] {
            let expected = -0.8 / ((1.0 - t) * (1.0 - t) + t * t);
            assert!((o.analytic_mixture_score(&[0.8], t)[0] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetric_mixture_has_zero_score_at_origin() {
        let o = GaussianMixtureOracle::new(vec![vec![-1.0], vec![1.0]], vec![0.1, 0.1], vec![0.5, 0.5]).unwrap();
        for &t in &[0.1, 0.5, 0.9] {
            assert_eq!(o.analytic_mixture_score(&[0.0], t)[0], 0.0);
        }
    }

    #[test]
    fn score_matches_finite_differences_of_log_density() {
        let o = GaussianMixtureOracle::new(
            vec![vec![-0.6, 0.2], vec![0.5, -0.3], vec![0.1, 0.9]],
            vec![0.05, 0.2, 0.01],
            vec![0.3, 0.5, 0.2],
        )
        .unwrap();
        let h = 1e-5;
        for &t in &[0.1, 0.4, 0.8] {
            for i in 0..13 {
                for j in 0..13 {
                    let x = [-3.0 + 0.5 * i as f64, -3.0 + 0.5 * j as f64];
                    let g = o.analytic_mixture_score(&x, t);
                    for d in 0..2 {
                        let mut xp = x;
                        let mut xm = x;
                        xp[d] += h;
                        xm[d] -= h;
                        let fd = (o.log_density(&xp, t) - o.log_density(&xm, t)) / (2.0 * h);
                        assert!((fd - g[d]).abs() < 1e-6, "t={t} x={x:?}: {fd} vs {}", g[d]);
                    }
                }
            }
        }
    }

    #[test]
    fn gaussian_posterior_mean_and_score_forms() {
        let (mu, s2) = (0.4, 0.09);
        let o = GaussianMixtureOracle::gaussian(vec![mu], s2).unwrap();
        let l = LinearInterpolant;
        for &t in &[0.2, 0.6] {
            let (a, s) = (1.0 - t, t);
            let x = 0.7;
            let m = o.posterior_mean(&[x], t)[0];
            assert!((m - (a * s2 * x + s * s * mu) / (a * a * s2 + s * s)).abs() < 1e-15);
            let sc = convert::score_from_posterior_mean(&l, &[m], &[x], t).unwrap()[0];
            assert!((sc + (x - a * mu) / (a * a * s2 + s * s)).abs() < 1e-12);
        }
        // Uninformative observation: the posterior mean is the prior mean.
        assert_eq!(o.posterior_mean(&[5.0], 1.0)[0], mu);
    }

    #[test]
    fn point_mass_posterior_is_exact() {
        let o = GaussianMixtureOracle::gaussian(vec![0.25, -0.5], 0.0).unwrap();
        for &t in &[0.1, 0.5, 1.0] {
            assert_eq!(o.posterior_mean(&[3.0, 1.0], t), vec![0.25, -0.5]);
        }
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(GaussianMixtureOracle::new(vec![vec![0.0]], vec![1.0], vec![0.5]).is_err());
        assert!(GaussianMixtureOracle::new(vec![vec![0.0], vec![1.0]], vec![1.0, 1.0], vec![1.2, -0.2]).is_err());
    }
}
