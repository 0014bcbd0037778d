//! Bent-cigar style F1 and shifted/rotated Rastrigin F4 from the CEC2017 suite.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::stream;

/// Orthogonal matrix applied as `z = Q (x - shift)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    matrix: DMatrix<f64>,
}

impl Rotation {
    /// Rejects matrices with `max |Q^T Q - I| > 1e-8`.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::invalid("rotation must be square"));
        }
        let n = matrix.nrows();
        let gram = matrix.transpose() * &matrix;
        let dev = (gram - DMatrix::<f64>::identity(n, n)).amax();
        if dev > 1e-8 {
            return Err(Error::invalid(format!("rotation is not orthogonal (deviation {dev:e})")));
        }
        Ok(Self { matrix })
    }

    /// QR of a seeded Gaussian matrix, with column signs fixed by `diag(R) > 0`.
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = stream(seed, &[0x524F_5441]);
        let g = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        let qr = g.qr();
        let (mut q, r) = qr.unpack();
        for j in 0..n {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        Self { matrix: q }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.matrix[(i, j)] * x[j]).sum())
            .collect()
    }
}

fn transform(x: &[f64], rotation: Option<&Rotation>, shift: Option<&[f64]>) -> Vec<f64> {
    let shifted: Vec<f64> = match shift {
        Some(s) => x.iter().zip(s).map(|(a, b)| a - b).collect(),
        None => x.to_vec(),
    };
    match rotation {
        Some(r) => r.apply(&shifted),
        None => shifted,
    }
}

/// `z_1^2 + 1e6 * sum_{k>=2} z_k^2`.
pub fn f1_2017(x: &[f64], rotation: Option<&Rotation>, shift: Option<&[f64]>) -> f64 {
    let z = transform(x, rotation, shift);
    match z.split_first() {
        Some((first, rest)) => first * first + 1e6 * rest.iter().map(|v| v * v).sum::<f64>(),
        None => 0.0,
    }
}

/// `sum_k (z_k^2 - 10 cos(2 pi z_k) + 10)`.
pub fn f4_2017(x: &[f64], rotation: Option<&Rotation>, shift: Option<&[f64]>) -> f64 {
    transform(x, rotation, shift)
        .iter()
        .map(|&v| v * v - 10.0 * (2.0 * PI * v).cos() + 10.0)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn f1_reference_values() {
        assert_eq!(f1_2017(&[0.0, 0.0, 0.0], None, None), 0.0);
        assert_eq!(f1_2017(&[1.0, 0.0, 0.0], None, None), 1.0);
        assert_eq!(f1_2017(&[0.0, 1.0, 0.0], None, None), 1e6);
    }

    #[test]
    fn f4_reference_values() {
        assert!(f4_2017(&[0.0, 0.0], None, None).abs() < 1e-12);
        assert!((f4_2017(&[0.5], None, None) - 20.25).abs() < 1e-12);
        assert!((f4_2017(&[1.0], None, None) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn f4_is_separable_without_rotation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-100.0..100.0)).collect();
            let total = f4_2017(&x, None, None);
            let parts: f64 = x.iter().map(|&v| f4_2017(&[v], None, None)).sum();
            assert!((total - parts).abs() < 1e-9);
        }
    }

    #[test]
    fn random_rotation_is_orthogonal_and_shift_moves_optimum() {
        let rot = Rotation::random(5, 42);
        assert!(Rotation::new(rot.matrix().clone()).is_ok());
        let shift = [3.0, -2.0, 1.5, 0.25, -7.0];
        assert!(f4_2017(&shift, Some(&rot), Some(&shift)).abs() < 1e-12);
        assert!(f1_2017(&shift, Some(&rot), Some(&shift)).abs() < 1e-12);
        // Rotation preserves the norm, so F1 with an all-1e6 weighting bound holds.
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!(f1_2017(&x, Some(&rot), None) <= 1e6 * 55.0 + 1e-6);
    }

    #[test]
    fn non_orthogonal_rotation_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(Rotation::new(m).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(Rotation::new(m).is_ok());
    }
}
