//! Cross-oracle self-checks behind `oracle-check`: identities between the
//! score forms and gradient estimators, compared against analytic and
//! quadrature references.

use std::time::Instant;

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::optimizer::{
    gauss_hermite, gaussian_homotopy_gradient, mc_gradient, mc_gradient_with_noise, stable_mc_gradient_with_noise,
    QuadratureDensity,
};
use crate::problems::{fractal_objective, Fitness};
use crate::sampling::{calibrate_temp, PoolConfig};
use crate::sampling::antithetic_noise;

use crate::schedule::{log_forward_density, log_inverse_density, Interpolant, LinearInterpolant};
use crate::scorefield::{posterior_mean, score_from_posterior_mean, score_from_velocity, GaussianMixtureOracle, ScoreSource};

#[derive(Debug, Clone, Default)]
pub struct CheckOptions {
    /// Negative control: flip the sign of the posterior-mean score form.
    pub flip_posterior_score_sign: bool,
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
    pub seconds: f64,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn mixture_2d() -> GaussianMixtureOracle {
    GaussianMixtureOracle::new(vec![vec![-0.5, 0.3], vec![0.4, -0.2]], vec![0.02, 0.05], vec![0.35, 0.65]).expect("valid mixture")
}

/// Velocity and posterior-mean score forms agree with each other and with
/// the analytic mixture score; posterior mean round-trips through the velocity.
fn score_forms(opts: &CheckOptions) -> Result<f64> {
    let o = mixture_2d();
    let interp = LinearInterpolant;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for k in 1..10 {
        let t = k as f64 / 10.0;
        for _ in 0..20 {
            let x_t: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let xt = Array2::from_shape_vec((1, 2), x_t.clone()).expect("shape");
            let v = o.velocity_batch(xt.view(), t)?.row(0).to_vec();
            let m = o.posterior_mean(&x_t, t);
            let via_v = score_from_velocity(&interp, &v, &x_t, t)?;
            let mut via_m = score_from_posterior_mean(&interp, &m, &x_t, t)?;
            if opts.flip_posterior_score_sign {
                via_m.iter_mut().for_each(|s| *s = -*s);
            }
            let analytic = o.analytic_mixture_score(&x_t, t);
            let m_back = posterior_mean(&interp, &v, &x_t, t)?;
            for d in 0..2 {
                worst = worst.max(rel(via_v[d], via_m[d])).max(rel(via_v[d], analytic[d])).max(rel(m_back[d], m[d]));
            }
        }
    }
    Ok(worst)
}

fn mixture_score_fd() -> Result<f64> {
    let o = mixture_2d();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for k in 1..10 {
        let t = k as f64 / 10.0;
        for _ in 0..10 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = o.analytic_mixture_score(&x, t);
            for d in 0..2 {
                let (mut p, mut q) = (x.clone(), x.clone());
                p[d] += h;
                q[d] -= h;
                let fd = (o.log_density(&p, t) - o.log_density(&q, t)) / (2.0 * h);
                worst = worst.max((fd - s[d]).abs() / s[d].abs().max(1.0));
            }
        }
    }
    Ok(worst)
}

fn rescaling_identity() -> Result<f64> {
    let o = mixture_2d();
    let mut worst = 0.0f64;
    for n in [1usize, 2, 8] {
        let oracle = if n == 2 {
            o.clone()
        } else {
            GaussianMixtureOracle::new(vec![vec![-0.4; n], vec![0.3; n]], vec![0.03, 0.06], vec![0.5, 0.5])?
        };
        let mut rng = ChaCha8Rng::seed_from_u64(13 + n as u64);
        let eps = antithetic_noise(128, n, &mut rng)?;
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for k in 1..10 {
            let t = k as f64 / 10.0;
            let plain = mc_gradient_with_noise(&oracle, &x, t, eps.view())?;
            let stable = stable_mc_gradient_with_noise(&oracle, &x, t, eps.view())?;
            let (a, s) = (oracle.interpolant().alpha(t), oracle.interpolant().sigma(t));
            for d in 0..n {
                worst = worst.max(rel(stable[d], s / a * plain[d]));
            }
        }
    }
    Ok(worst)
}

fn zero_at_t_one() -> Result<f64> {
    let o = mixture_2d();
    let g = mc_gradient(&o, &[0.3, -0.7], 1.0, 128, &mut ChaCha8Rng::seed_from_u64(14))?;
    Ok(g.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

fn antithetic_and_density_ratio() -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let eps = antithetic_noise(256, 5, &mut rng)?;
    let mut worst = eps.sum_axis(Axis(0)).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let interp = LinearInterpolant;
    for n in [1usize, 3, 6] {
        for k in 1..10 {
            let t = k as f64 / 10.0;
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x_t: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ratio = (log_inverse_density(&interp, &x, &x_t, t)? - log_forward_density(&interp, &x_t, &x, t)?).exp();
            worst = worst.max(rel(ratio, interp.alpha(t).powi(n as i32)));
        }
    }
    Ok(worst)
}

fn gaussian_closed_form() -> Result<f64> {
    let (mu, s2) = ([0.2, -0.35], 0.05);
    let o = GaussianMixtureOracle::gaussian(mu.to_vec(), s2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut worst = 0.0f64;
    for k in 1..10 {
        let t = k as f64 / 10.0;
        let (a, s) = (1.0 - t, t);
        let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let g = mc_gradient(&o, &x, t, 128, &mut rng)?;
        for d in 0..2 {
            let exact = -a * a * (x[d] - mu[d]) / (a * a * s2 + s * s);
            worst = worst.max(rel(g[d], exact));
        }
    }
    Ok(worst)
}

/// Monte Carlo gradient at 4096 samples against a tensor Gauss–Hermite
/// expectation of the analytic score.
fn mixture_vs_hermite() -> Result<f64> {
    let o = mixture_2d();
    let gh = gauss_hermite(48);
    let c = std::f64::consts::SQRT_2;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = 0.0f64;
    for &t in &[0.2, 0.5, 0.8] {
        let (a, s) = (1.0 - t, t);
        let x = [0.6, 0.5];
        let mut reference = [0.0; 2];
        for (z1, w1) in gh.nodes.iter().zip(&gh.weights) {
            for (z2, w2) in gh.nodes.iter().zip(&gh.weights) {
                let xt = [a * x[0] + s * c * z1, a * x[1] + s * c * z2];
                let sc = o.analytic_mixture_score(&xt, t);
                for d in 0..2 {
                    reference[d] += w1 * w2 * sc[d] / std::f64::consts::PI;
                }
            }
        }
        let g = mc_gradient(&o, &x, t, 4096, &mut rng)?;
        let norm = (reference[0].powi(2) + reference[1].powi(2)).sqrt() * a;
        let err = ((g[0] - a * reference[0]).powi(2) + (g[1] - a * reference[1]).powi(2)).sqrt();
        worst = worst.max(err / norm);
    }
    Ok(worst)
}

/// Antithetic Monte Carlo gradient and its standard error (per component).
fn mc_gradient_with_se(source: &dyn ScoreSource, x: &[f64], t: f64, monte_size: usize, rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = x.len();
    let (a, s) = (source.interpolant().alpha(t), source.interpolant().sigma(t));
    let eps = antithetic_noise(monte_size, n, rng)?;
    let xt = Array2::from_shape_fn(eps.raw_dim(), |(i, d)| a * x[d] + s * eps[[i, d]]);
    let sc = source.score_batch(xt.view(), t)?;
    let pairs = eps.nrows() / 2;
    let p = pairs as f64;
    let mut mean = vec![0.0; n];
    let mut sq = vec![0.0; n];
    for k in 0..pairs {
        for d in 0..n {
            let g = a * 0.5 * (sc[[2 * k, d]] + sc[[2 * k + 1, d]]);
            mean[d] += g / p;
            sq[d] += g * g;
        }
    }
    let se = (0..n).map(|d| ((sq[d] - p * mean[d] * mean[d]) / (p - 1.0) / p).sqrt()).collect();
    Ok((mean, se))
}

/// 1-D fractal fitness density `exp(-F / T)` on the normalized box, with `T`
/// calibrated as for a uniform pool: Monte Carlo gradient (4096 samples) with
/// the quadrature score against central differences of the quadrature
/// objective.
///
/// The 1% bound is applied where it spans at least three standard errors of
/// the estimator; elsewhere the estimate must lie within four standard errors.
/// Returns the worst relative error over the former, or infinity on a
/// statistical mismatch or when fewer than three points qualify.
fn fractal_quadrature() -> Result<f64> {
    let f = |x: f64| fractal_objective((x + 1.0) / 2.0, 21);
    let raw: Vec<Fitness> = (0..4097).map(|k| Fitness::Feasible(-f(-1.0 + k as f64 / 2048.0))).collect();
    let temp = calibrate_temp(&raw, PoolConfig::default().c_pstd)?.temp;
    let q = QuadratureDensity::new(|x| (-f(x) / temp).exp(), -1.0, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let h = 1e-4;
    let mut worst = 0.0f64;
    let mut qualified = 0;
    for &t in &[0.15, 0.3, 0.5] {
        for k in 0..9 {
            let x = -0.8 + 0.2 * k as f64;
            let fd = (q.log_objective(x + h, t) - q.log_objective(x - h, t)) / (2.0 * h);
            let (g, se) = mc_gradient_with_se(&q, &[x], t, 4096, &mut rng)?;
            let err = (g[0] - fd).abs();
            if err > 4.0 * se[0] + 1e-9 {
                return Ok(f64::INFINITY);
            }
            if 3.0 * se[0] <= 0.01 * fd.abs() {
                qualified += 1;
                worst = worst.max(err / fd.abs());
            }
        }
    }
    Ok(if qualified >= 3 { worst } else { f64::INFINITY })
}

/// Product of identical 1-D two-component mixtures (`2^n` components), so
/// every coordinate sees the same problem whatever `n` is.
fn product_mixture(n: usize) -> Result<GaussianMixtureOracle> {
    let mut means = Vec::new();
    let mut weights = Vec::new();
    for mask in 0..(1usize << n) {
        let bits: Vec<bool> = (0..n).map(|d| mask >> d & 1 == 1).collect();
        means.push(bits.iter().map(|&b| if b { 0.5 } else { -0.5 }).collect());
        weights.push(bits.iter().map(|&b| if b { 0.6 } else { 0.4 }).product());
    }
    GaussianMixtureOracle::new(means, vec![0.05; 1 << n], weights)
}

/// Relative standard errors at 1e4 samples over n = 1, 2, 4, 8: the
/// homotopy estimator on `|y|^2` and the score-based gradient on a product
/// mixture.
pub fn dimension_scaling() -> Result<(Vec<f64>, Vec<f64>)> {
    let dims = [1usize, 2, 4, 8];
    let mut homotopy = Vec::new();
    let mut score_based = Vec::new();
    for &n in &dims {
        let mut rng = ChaCha8Rng::seed_from_u64(19 + n as u64);
        let x = vec![1.0; n];
        let e = gaussian_homotopy_gradient(|y| y.iter().map(|v| v * v).sum(), &x, 0.5, 10_000, &mut rng)?;
        homotopy.push(e.relative_standard_error(&vec![2.0; n]));

        let o = product_mixture(n)?;
        let (mean, se) = mc_gradient_with_se(&o, &vec![0.2; n], 0.5, 10_000, &mut rng)?;
        let var: f64 = se.iter().map(|v| v * v).sum();
        let norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
        score_based.push(var.sqrt() / norm);
    }
    Ok((homotopy, score_based))
}

fn homotopy_scaling() -> Result<f64> {
    let (h, s) = dimension_scaling()?;
    let increasing = h.windows(2).all(|w| w[1] > w[0]);
    let spread = s.iter().cloned().fold(0.0f64, f64::max) / s.iter().cloned().fold(f64::INFINITY, f64::min);
    // Reported value: spread of the score-based error (must stay within 2x),
    // forced to infinity if the homotopy error is not increasing.
    Ok(if increasing { spread } else { f64::INFINITY })
}

type Check = (&'static str, f64, fn(&CheckOptions) -> Result<f64>);

pub const CHECKS: &[Check] = &[
    ("score-forms", 1e-9, score_forms),
    ("mixture-score-fd", 1e-6, |_| mixture_score_fd()),
    ("stable-rescaling", 1e-12, |_| rescaling_identity()),
    ("zero-gradient-at-t1", 0.0, |_| zero_at_t_one()),
    ("antithetic-and-density-ratio", 1e-9, |_| antithetic_and_density_ratio()),
    ("gaussian-closed-form", 1e-9, |_| gaussian_closed_form()),
    ("mixture-vs-hermite", 0.05, |_| mixture_vs_hermite()),
    ("fractal-quadrature", 0.01, |_| fractal_quadrature()),
    ("homotopy-dimension-scaling", 2.0, |_| homotopy_scaling()),
];

pub fn run_checks(opts: &CheckOptions) -> Vec<CheckResult> {
    CHECKS
        .iter()
        .map(|(name, tol, f)| {
            let clock = Instant::now();
            let worst = f(opts).unwrap_or(f64::INFINITY);
            CheckResult {
                name,
                passed: worst <= *tol,
                worst,
                tolerance: *tol,
                seconds: clock.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

pub fn render(results: &[CheckResult]) -> String {
    let mut s = format!("{:<30} {:>6} {:>12} {:>10} {:>8}\n", "check", "result", "worst", "tolerance", "seconds");
    for r in results {
        s.push_str(&format!(
            "{:<30} {:>6} {:>12.3e} {:>10.1e} {:>8.2}\n",
            r.name,
            if r.passed { "pass" } else { "FAIL" },
            r.worst,
            r.tolerance,
            r.seconds
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        let results = run_checks(&CheckOptions::default());
        assert!(results.iter().all(|r| r.passed), "{}", render(&results));
    }

    #[test]
    fn sign_flip_is_caught_by_score_forms_only() {
        let results = run_checks(&CheckOptions {
            flip_posterior_score_sign: true,
        });
        let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
        assert_eq!(failed, vec!["score-forms"]);
    }
}
