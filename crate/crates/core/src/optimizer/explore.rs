//! Multiple incumbents: merge near-duplicates, keep the best, and spawn new
//! candidates around the survivors at the current smoothing width.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::Interpolant;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExploreConfig {
    pub keep_start: usize,
    pub keep_end: usize,
    pub explore_start: usize,
    pub explore_end: usize,
    /// Merge radius in units of `sigma_t / alpha_t`.
    pub kappa: f64,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        Self {
            keep_start: 4,
            keep_end: 8,
            explore_start: 4,
            explore_end: 2,
            kappa: 1.0,
        }
    }
}

fn lerp_round(a: usize, b: usize, i: usize, tn: usize) -> usize {
    if tn == 0 {
        return a;
    }
    let f = i.min(tn) as f64 / tn as f64;
    (a as f64 + (b as f64 - a as f64) * f).round() as usize
}

impl ExploreConfig {
    pub fn validate(&self) -> Result<()> {
        if self.keep_start == 0 || self.keep_end == 0 {
            return Err(Error::Config("explore keep sizes must be >= 1".into()));
        }
        if !(self.kappa >= 0.0) {
            return Err(Error::Config("explore.kappa must be non-negative".into()));
        }
        Ok(())
    }

    /// Linear in the scale index, rounded.
    pub fn keep_size(&self, i: usize, tn: usize) -> usize {
        lerp_round(self.keep_start, self.keep_end, i, tn).max(1)
    }

    pub fn explore_time(&self, i: usize, tn: usize) -> usize {
        lerp_round(self.explore_start, self.explore_end, i, tn)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub id: usize,
    pub parent: Option<usize>,
    /// Normalized coordinates.
    pub x: Vec<f64>,
    /// Raw fitness, `-inf` when infeasible.
    pub fitness: f64,
}

fn max_norm_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Greedy merge in order of decreasing fitness (ties by id): a candidate
/// closer than `radius` in max-norm to an already kept one is absorbed by
/// it. The first `keep` survivors are returned.
pub fn merge_and_prune(mut cands: Vec<Candidate>, radius: f64, keep: usize) -> Vec<Candidate> {
    cands.sort_by(|a, b| b.fitness.total_cmp(&a.fitness).then(a.id.cmp(&b.id)));
    let mut kept: Vec<Candidate> = Vec::new();
    for c in cands {
        if kept.len() >= keep {
            break;
        }
        if kept.iter().all(|k| max_norm_distance(&k.x, &c.x) >= radius) {
            kept.push(c);
        }
    }
    kept
}

/// One merge/prune/spawn round at scale `t` (scale index `i` of `tn`).
///
/// Merge radius is `kappa sigma_t / alpha_t`; children are drawn from
/// `N(x*, (sqrt(2) sigma_t / alpha_t)^2 I)` and clamped to the box. At
/// `alpha_t = 0` both widths are infinite: everything merges into the best
/// candidate and children are uniform on the box. With `spawn = false` only
/// merge and prune run.
#[allow(clippy::too_many_arguments)]
pub fn parallel_explore_step<R: Rng + ?Sized>(
    cands: Vec<Candidate>,
    fitness: &(dyn Fn(&[f64]) -> f64 + Sync),
    interp: &dyn Interpolant,
    t: f64,
    i: usize,
    tn: usize,
    cfg: &ExploreConfig,
    spawn: bool,
    next_id: &mut usize,
    rng: &mut R,
) -> Vec<Candidate> {
    if cands.is_empty() {
        return cands;
    }
    let (a, s) = (interp.alpha(t), interp.sigma(t));
    let ratio = if a > 0.0 { s / a } else { f64::INFINITY };
    let radius = if cfg.kappa == 0.0 { 0.0 } else { cfg.kappa * ratio };
    let survivors = merge_and_prune(cands, radius, cfg.keep_size(i, tn));
    if !spawn {
        return survivors;
    }
    let width = std::f64::consts::SQRT_2 * ratio;
    let count = cfg.explore_time(i, tn);
    let mut out = survivors.clone();
    for parent in &survivors {
        for _ in 0..count {
            let x: Vec<f64> = parent
                .x
                .iter()
                .map(|&c| {
                    if width.is_finite() {
                        (c + width * rng.sample::<f64, _>(StandardNormal)).clamp(-1.0, 1.0)
                    } else {
                        rng.gen_range(-1.0..=1.0)
                    }
                })
                .collect();
            let f = fitness(&x);
            out.push(Candidate {
                id: *next_id,
                parent: Some(parent.id),
                x,
                fitness: f,
            });
            *next_id += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::LinearInterpolant;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cand(id: usize, x: Vec<f64>, fitness: f64) -> Candidate {
        Candidate {
            id,
            parent: None,
            x,
            fitness,
        }
    }

    fn neg_sq(x: &[f64]) -> f64 {
        -x.iter().map(|v| v * v).sum::<f64>()
    }

    #[test]
    fn schedules_interpolate() {
        let c = ExploreConfig::default();
        assert_eq!(c.keep_size(0, 30), 4);
        assert_eq!(c.keep_size(30, 30), 8);
        assert_eq!(c.keep_size(15, 30), 6);
        assert_eq!(c.explore_time(0, 30), 4);
        assert_eq!(c.explore_time(30, 30), 2);
        assert_eq!(c.explore_time(15, 30), 3);
        assert_eq!(c.keep_size(0, 0), 4);
    }

    #[test]
    fn identical_solutions_merge() {
        let out = merge_and_prune(vec![cand(0, vec![0.2], 1.0), cand(1, vec![0.2], 2.0)], 1e-9, 10);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].id, 1);
    }

    #[test]
    fn degenerate_config_returns_best() {
        let cfg = ExploreConfig {
            keep_start: 1,
            keep_end: 1,
            explore_start: 0,
            explore_end: 0,
            kappa: 1.0,
        };
        let cands = vec![cand(0, vec![0.5], -0.25), cand(1, vec![-0.1], -0.01), cand(2, vec![0.9], -0.81)];
        let mut next = 3;
        let out = parallel_explore_step(cands, &neg_sq, &LinearInterpolant, 0.01, 5, 10, &cfg, true, &mut next, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].id, 1);
    }

    #[test]
    fn infinite_width_at_t_one() {
        let cfg = ExploreConfig::default();
        let cands = vec![cand(0, vec![0.5, 0.5], -0.5), cand(1, vec![-0.9, 0.9], -1.62)];
        let mut next = 2;
        let out = parallel_explore_step(cands, &neg_sq, &LinearInterpolant, 1.0, 0, 30, &cfg, true, &mut next, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(out.len(), 1 + 4);
        assert_eq!(out[0].id, 0);
        assert!(out.iter().all(|c| c.x.iter().all(|v| (-1.0..=1.0).contains(v))));
        assert!(out[1..].iter().all(|c| c.parent == Some(0)));
    }

    proptest! {
        #[test]
        fn bounded_size_and_best_kept(
            xs in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 2), 1..30),
            t in 0.001f64..0.99,
            i in 0usize..31,
            seed in any::<u64>(),
        ) {
            let cfg = ExploreConfig::default();
            let cands: Vec<Candidate> = xs.iter().enumerate().map(|(k, x)| cand(k, x.clone(), neg_sq(x))).collect();
            let best = cands.iter().map(|c| c.fitness).fold(f64::NEG_INFINITY, f64::max);
            let mut next = cands.len();
            let out = parallel_explore_step(cands, &neg_sq, &LinearInterpolant, t, i, 30, &cfg, true, &mut next, &mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert!(out.len() <= cfg.keep_size(i, 30) * (1 + cfg.explore_time(i, 30)));
            prop_assert!(out.iter().any(|c| c.fitness == best));
            prop_assert!(out.iter().all(|c| c.x.iter().all(|v| (-1.0..=1.0).contains(v))));
        }
    }
}
