//! Fourier-series fractal objective with frequencies `2^i pi` and geometric
//! coefficients `0.7^i`.

use std::f64::consts::PI;

/// Default number of retained series terms; the last coefficient is `0.7^20 ~ 8e-4`.
pub const DEFAULT_DEPTH: usize = 21;

/// Coefficients `(a_i, b_i, k_i)` of term `i`.
pub fn coefficients(i: usize) -> (f64, f64, f64) {
    let r = (-0.7f64).powi(i as i32);
    let a = -r;
    let b = if i == 0 { 0.0 } else { r };
    let k = 2f64.powi(i as i32) * PI;
    (a, b, k)
}

#[inline]
fn term(i: usize, x: f64) -> f64 {
    let (a, b, k) = coefficients(i);
    a * (k * x).sin() + b * (k * x).cos()
}

/// Sum of the first `depth` series terms.
pub fn fractal_objective(x: f64, depth: usize) -> f64 {
    (0..depth).map(|i| term(i, x)).sum()
}

/// Low-frequency partial sum, blended linearly in `t_real`.
///
/// Integer `m` gives the first `m + 1` terms; between integers the next term
/// is faded in with weight `t_real - floor(t_real)`, so the result is
/// continuous in `t_real`.
pub fn fourier_partial_objective(x: f64, t_real: f64) -> f64 {
    let t_real = t_real.max(0.0);
    let whole = t_real.floor();
    let frac = t_real - whole;
    let m = whole as usize;
    let head: f64 = (0..=m).map(|i| term(i, x)).sum();
    if frac == 0.0 {
        head
    } else {
        head + frac * term(m + 1, x)
    }
}

/// `(F(x) + F(1 - x)) / 2`: symmetric about 0.5 with two mirrored global minima.
pub fn multimodal_fractal(x: f64, depth: usize) -> f64 {
    0.5 * (fractal_objective(x, depth) + fractal_objective(1.0 - x, depth))
}
