//! Fitness-proportional training data: prior draws (global uniform or local
//! Gaussian), the exponential fitness transform with calibrated temperature,
//! systematic resampling, per-dimension debias loss weights, and antithetic
//! noise batches.

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::problems::{Fitness, Problem};
use crate::rng::stream;
use crate::schedule::Interpolant;

/// Log-temperature search interval for [`calibrate_temp`].
pub const LOG_TEMP_BOUND: f64 = 30.0;
const CALIBRATION_ITERS: usize = 200;
const GENERATION_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoolConfig {
    /// Target for `std(p) * len(p)` of the resampling distribution.
    pub c_pstd: f64,
    /// Probability mass of the local prior kept flat by the debias weights.
    pub mass: f64,
    /// Redraws per out-of-box coordinate before clamping.
    pub max_redraws: usize,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            c_pstd: 0.5,
            mass: 0.9,
            max_redraws: 16,
        }
    }
}

/// Nearest-rank percentile (`q` in `(0, 100]`) of a non-empty slice.
pub fn nearest_rank_percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn feasible_values(raw: &[Fitness]) -> Vec<f64> {
    raw.iter().filter_map(|f| f.value()).collect()
}

/// `exp((raw - TP99) / temp)` for feasible entries, zero for infeasible ones.
pub fn transform_fitness(raw: &[Fitness], temp: f64) -> Result<Vec<f64>> {
    if !(temp > 0.0) {
        return Err(Error::invalid(format!("temperature must be positive, got {temp}")));
    }
    let feasible = feasible_values(raw);
    if feasible.is_empty() {
        return Err(Error::EmptyFeasible { pool_size: raw.len() });
    }
    let tp99 = nearest_rank_percentile(&feasible, 99.0);
    Ok(raw
        .iter()
        .map(|f| match f {
            Fitness::Feasible(v) => ((v - tp99) / temp).exp(),
            Fitness::Infeasible => 0.0,
        })
        .collect())
}

/// Normalized resampling probabilities, computed with a max shift so that
/// tiny temperatures cannot overflow.
fn normalized_probs(raw: &[Fitness], temp: f64) -> Vec<f64> {
    let max = raw.iter().filter_map(|f| f.value()).fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = raw
        .iter()
        .map(|f| match f {
            Fitness::Feasible(v) => ((v - max) / temp).exp(),
            Fitness::Infeasible => 0.0,
        })
        .collect();
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= sum);
    p
}

/// `std(p) * len(p)` over the feasible values for `p ~ exp(v / temp)`.
pub fn pstd_statistic(feasible: &[f64], temp: f64) -> f64 {
    let n = feasible.len();
    if n == 0 {
        return 0.0;
    }
    let max = feasible.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = feasible.iter().map(|v| ((v - max) / temp).exp()).collect();
    let sum: f64 = w.iter().sum();
    let mean = 1.0 / n as f64;
    let var = w.iter().map(|x| (x / sum - mean).powi(2)).sum::<f64>() / n as f64;
    var.sqrt() * n as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TempCalibration {
    pub temp: f64,
    /// `std(p) * len(p)` at the returned temperature.
    pub statistic: f64,
    /// All feasible values equal: the statistic is zero for every temperature.
    pub flat: bool,
}

/// Finds the temperature whose resampling distribution has
/// `std(p) * len(p)` within 10% of `target`, by bisection on `ln(temp)` over
/// `[-30, 30]` (the statistic decreases monotonically in `temp`).
///
/// Only feasible entries enter the statistic. If the target is out of reach
/// the nearest interval endpoint is returned.
pub fn calibrate_temp(raw: &[Fitness], target: f64) -> Result<TempCalibration> {
    let feasible = feasible_values(raw);
    if feasible.is_empty() {
        return Err(Error::EmptyFeasible { pool_size: raw.len() });
    }
    let (lo_v, hi_v) = feasible
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if lo_v == hi_v {
        return Ok(TempCalibration {
            temp: LOG_TEMP_BOUND.exp(),
            statistic: 0.0,
            flat: true,
        });
    }
    let stat = |log_t: f64| pstd_statistic(&feasible, log_t.exp());
    let (mut lo, mut hi) = (-LOG_TEMP_BOUND, LOG_TEMP_BOUND);
    if stat(hi) >= target {
        return Ok(TempCalibration {
            temp: hi.exp(),
            statistic: stat(hi),
            flat: false,
        });
    }
    if stat(lo) <= target {
        return Ok(TempCalibration {
            temp: lo.exp(),
            statistic: stat(lo),
            flat: false,
        });
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..CALIBRATION_ITERS {
        mid = 0.5 * (lo + hi);
        let s = stat(mid);
        if (s - target).abs() <= 1e-4 * target {
            break;
        }
        if s > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(TempCalibration {
        temp: mid.exp(),
        statistic: stat(mid),
        flat: false,
    })
}

/// Systematic (low-variance) resampling: `count` indices drawn with
/// probability proportional to `weights`, returned in ascending order.
pub fn systematic_resample<R: Rng + ?Sized>(weights: &[f64], count: usize, rng: &mut R) -> Result<Vec<usize>> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::EmptyFeasible { pool_size: weights.len() });
    }
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return Ok(out);
    }
    let step = total / count as f64;
    let mut u = rng.gen::<f64>() * step;
    let mut cum = 0.0;
    let mut idx = 0;
    for _ in 0..count {
        while idx + 1 < weights.len() && cum + weights[idx] <= u {
            cum += weights[idx];
            idx += 1;
        }
        // Floating-point slack at the tail must not land on a zero weight.
        while weights[idx] == 0.0 && idx > 0 {
            idx -= 1;
        }
        out.push(idx);
        u += step;
    }
    Ok(out)
}

/// I.i.d. uniform points on `[-1, 1]^dim`, one row per point.
pub fn uniform_prior<R: Rng + ?Sized>(count: usize, dim: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_fn((count, dim), |_| rng.gen_range(-1.0..=1.0))
}

/// Isotropic Gaussian proposal around an incumbent, with the radius holding
/// `mass` of the probability per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPrior {
    pub center: Vec<f64>,
    pub sd: f64,
    pub radius: f64,
    pub mass: f64,
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(p)
}

impl LocalPrior {
    pub fn new(center: Vec<f64>, sd: f64, mass: f64) -> Result<Self> {
        if !(sd > 0.0) || !sd.is_finite() {
            return Err(Error::invalid(format!("local prior sd must be positive and finite, got {sd}")));
        }
        if !(mass > 0.0 && mass < 1.0) {
            return Err(Error::invalid(format!("debias mass must lie in (0,1), got {mass}")));
        }
        let radius = normal_quantile(0.5 + 0.5 * mass) * sd;
        Ok(Self { center, sd, radius, mass })
    }

    /// `sd = sqrt(2) sigma_t / alpha_t`, the width of `p_t(x | center)`.
    pub fn at_scale(center: Vec<f64>, interp: &dyn Interpolant, t: f64, mass: f64) -> Result<Self> {
        let alpha = interp.alpha(t);
        if alpha <= 0.0 {
            return Err(Error::DegenerateKernel {
                t,
                reason: "local prior needs alpha_t > 0",
            });
        }
        Self::new(center, std::f64::consts::SQRT_2 * interp.sigma(t) / alpha, mass)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }
}

/// Gaussian draws around `prior.center`; out-of-box coordinates are redrawn
/// up to `max_redraws` times, then clamped to `[-1, 1]`.
pub fn local_prior_sample<R: Rng + ?Sized>(
    prior: &LocalPrior,
    count: usize,
    max_redraws: usize,
    rng: &mut R,
) -> Array2<f64> {
    let n = prior.dim();
    let mut out = Array2::zeros((count, n));
    for mut row in out.rows_mut() {
        for (d, v) in row.iter_mut().enumerate() {
            let c = prior.center[d];
            let mut x = c + prior.sd * rng.sample::<f64, _>(StandardNormal);
            let mut tries = 0;
            while !(-1.0..=1.0).contains(&x) && tries < max_redraws {
                x = c + prior.sd * rng.sample::<f64, _>(StandardNormal);
                tries += 1;
            }
            *v = x.clamp(-1.0, 1.0);
        }
    }
    out
}

/// Per-dimension loss weights turning the Gaussian proposal into a flat
/// density of total `mass` on `[c - r, c + r]`, with Gaussian tails outside.
pub fn debias_weights(x: &[f64], prior: &LocalPrior) -> Vec<f64> {
    let flat = prior.mass / (2.0 * prior.radius);
    x.iter()
        .zip(&prior.center)
        .map(|(&xd, &cd)| {
            let dev = xd - cd;
            if dev.abs() <= prior.radius {
                let z = dev / prior.sd;
                let pdf = (-0.5 * z * z).exp() / (prior.sd * (2.0 * std::f64::consts::PI).sqrt());
                flat / pdf
            } else {
                1.0
            }
        })
        .collect()
}

/// `monte_size` rows arranged as `(eps_1, -eps_1, eps_2, -eps_2, ...)`.
pub fn antithetic_noise<R: Rng + ?Sized>(monte_size: usize, dim: usize, rng: &mut R) -> Result<Array2<f64>> {
    if monte_size == 0 || monte_size % 2 != 0 {
        return Err(Error::invalid(format!("monte_size must be even and positive, got {monte_size}")));
    }
    let mut out = Array2::zeros((monte_size, dim));
    for k in 0..monte_size / 2 {
        for d in 0..dim {
            let e: f64 = rng.sample(StandardNormal);
            out[[2 * k, d]] = e;
            out[[2 * k + 1, d]] = -e;
        }
    }
    Ok(out)
}

/// Prior used to propose pool candidates.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorStage {
    Global,
    Local(LocalPrior),
}

/// Candidates with raw fitness, calibrated temperature and resampling weights.
#[derive(Debug, Clone)]
pub struct FitnessPool {
    pub points: Array2<f64>,
    pub raw: Vec<Fitness>,
    pub tp99: f64,
    pub temp: f64,
    pub statistic: f64,
    pub flat: bool,
    /// Transformed fitness per candidate (zero when infeasible).
    pub weights: Vec<f64>,
    pub probs: Vec<f64>,
    /// Per-dimension debias loss weights (local stage only).
    pub loss_weights: Option<Array2<f64>>,
    pub feasible_fraction: f64,
}

impl FitnessPool {
    /// Assembles a pool from already-drawn points.
    pub fn from_points(
        points: Array2<f64>,
        raw: Vec<Fitness>,
        loss_weights: Option<Array2<f64>>,
        cfg: &PoolConfig,
    ) -> Result<Self> {
        if raw.len() != points.nrows() {
            return Err(Error::DimensionMismatch {
                expected: points.nrows(),
                got: raw.len(),
            });
        }
        let calib = calibrate_temp(&raw, cfg.c_pstd)?;
        let feasible = feasible_values(&raw);
        let tp99 = nearest_rank_percentile(&feasible, 99.0);
        let weights = transform_fitness(&raw, calib.temp)?;
        let probs = normalized_probs(&raw, calib.temp);
        let feasible_fraction = feasible.len() as f64 / raw.len() as f64;
        Ok(Self {
            points,
            raw,
            tp99,
            temp: calib.temp,
            statistic: calib.statistic,
            flat: calib.flat,
            weights,
            probs,
            loss_weights,
            feasible_fraction,
        })
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Best feasible raw fitness in the pool.
    pub fn best_raw(&self) -> f64 {
        self.raw.iter().map(|f| f.or_neg_inf()).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Resamples `count` pool points in proportion to their transformed fitness.
pub fn fitness_resample<R: Rng + ?Sized>(pool: &FitnessPool, count: usize, rng: &mut R) -> Result<Array2<f64>> {
    let idx = systematic_resample(&pool.probs, count, rng)?;
    Ok(pool.points.select(Axis(0), &idx))
}

/// Draws `pool_size` candidates from the stage prior, evaluates them in
/// parallel, and calibrates the fitness transform.
///
/// Candidate generation runs in fixed-size chunks with independent streams
/// derived from one draw of `rng`, so the pool does not depend on the number
/// of worker threads.
pub fn build_training_pool<R: Rng + ?Sized>(
    problem: &Problem,
    stage: &PriorStage,
    pool_size: usize,
    cfg: &PoolConfig,
    rng: &mut R,
) -> Result<FitnessPool> {
    if pool_size == 0 {
        return Err(Error::invalid("pool_size must be positive"));
    }
    let n = problem.dim();
    if let PriorStage::Local(prior) = stage {
        if prior.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: prior.dim(),
            });
        }
    }
    let base: u64 = rng.gen();
    let chunks: Vec<(usize, usize)> = (0..pool_size)
        .step_by(GENERATION_CHUNK)
        .map(|s| (s, (s + GENERATION_CHUNK).min(pool_size)))
        .collect();
    let blocks: Vec<Array2<f64>> = chunks
        .par_iter()
        .enumerate()
        .map(|(c, &(s, e))| {
            let mut r = stream(base, &[c as u64]);
            match stage {
                PriorStage::Global => uniform_prior(e - s, n, &mut r),
                PriorStage::Local(prior) => local_prior_sample(prior, e - s, cfg.max_redraws, &mut r),
            }
        })
        .collect();
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    let points = ndarray::concatenate(Axis(0), &views).expect("blocks share a width");

    let raw: Vec<Fitness> = (0..pool_size)
        .into_par_iter()
        .map(|i| problem.raw_fitness(points.row(i).as_slice().expect("standard layout")))
        .collect();
    if raw.iter().all(|f| !f.is_feasible()) {
        return Err(Error::EmptyFeasible { pool_size });
    }
    let loss_weights = match stage {
        PriorStage::Global => None,
        PriorStage::Local(prior) => {
            let mut w = Array2::zeros((pool_size, n));
            for (i, row) in points.rows().into_iter().enumerate() {
                let wi = debias_weights(row.as_slice().expect("standard layout"), prior);
                w.row_mut(i).assign(&ndarray::ArrayView1::from(&wi));
            }
            Some(w)
        }
    };
    FitnessPool::from_points(points, raw, loss_weights, cfg)
}
