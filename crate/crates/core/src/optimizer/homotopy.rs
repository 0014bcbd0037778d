//! Gaussian-homotopy baseline: the gradient of the Gaussian-smoothed
//! objective `H(x) = E[f(x + sigma eps)]`, estimated from function values only.

use rand::Rng;

use crate::error::{Error, Result};
use crate::sampling::antithetic_noise;

#[derive(Debug, Clone, PartialEq)]
pub struct HomotopyEstimate {
    pub grad: Vec<f64>,
    /// Per-component variance of the estimate (sample variance of the pair
    /// estimates divided by the number of pairs).
    pub variance: Vec<f64>,
}

impl HomotopyEstimate {
    /// `||standard error|| / ||reference||`.
    pub fn relative_standard_error(&self, reference: &[f64]) -> f64 {
        let se = self.variance.iter().sum::<f64>().sqrt();
        let norm = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
        se / norm
    }
}

/// `grad H(x) = E[f(y) (y - x) / sigma^2]`, `y ~ N(x, sigma^2 I)`, averaged
/// over antithetic pairs as `(f(x + sigma eps) - f(x - sigma eps)) eps / (2 sigma)`.
pub fn gaussian_homotopy_gradient<R: Rng + ?Sized>(
    objective: impl Fn(&[f64]) -> f64,
    x: &[f64],
    sigma: f64,
    sample_count: usize,
    rng: &mut R,
) -> Result<HomotopyEstimate> {
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("homotopy sigma must be positive, got {sigma}")));
    }
    let n = x.len();
    let eps = antithetic_noise(sample_count, n, rng)?;
    let pairs = sample_count / 2;
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    for k in 0..pairs {
        let e = eps.row(2 * k);
        for d in 0..n {
            plus[d] = x[d] + sigma * e[d];
            minus[d] = x[d] - sigma * e[d];
        }
        let diff = (objective(&plus) - objective(&minus)) / (2.0 * sigma);
        for d in 0..n {
            let g = diff * e[d];
            sum[d] += g;
            sum_sq[d] += g * g;
        }
    }
    let p = pairs as f64;
    let grad: Vec<f64> = sum.iter().map(|s| s / p).collect();
    let variance = if pairs > 1 {
        sum_sq
            .iter()
            .zip(&grad)
            .map(|(sq, m)| (sq - p * m * m) / (p - 1.0) / p)
            .collect()
    } else {
        vec![f64::NAN; n]
    };
    Ok(HomotopyEstimate { grad, variance })
}
