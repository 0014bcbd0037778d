//! A configured run: the first stage on the problem's box, then optional
//! restart stages on shrunken boxes around the previous best.

use rand::Rng;

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::optimizer::{run_optimization, RunResult, TraceSink};
use crate::problems::Problem;
use crate::rng::{stream, tag};

#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub stage: usize,
    pub seed: u64,
    pub problem: Problem,
    pub result: RunResult,
}

/// Everything that finished before an error, plus the error itself.
pub struct RunOutcome {
    pub stages: Vec<StageOutcome>,
    pub error: Option<Error>,
}

impl RunOutcome {
    pub fn last(&self) -> Option<&StageOutcome> {
        self.stages.last()
    }
}

pub fn stage_seed(seed: u64, stage: usize) -> u64 {
    if stage == 0 {
        seed
    } else {
        stream(seed, &[tag::RESTART, stage as u64]).gen()
    }
}

/// Box of half-width `shrink` times the original half-width around `center`,
/// clipped to the original box.
pub fn shrunken_box(original: &Problem, center: &[f64], shrink: f64) -> (Vec<f64>, Vec<f64>) {
    let mut lower = Vec::with_capacity(center.len());
    let mut upper = Vec::with_capacity(center.len());
    for (d, &c) in center.iter().enumerate() {
        let (lo, hi) = (original.lower()[d], original.upper()[d]);
        let half = shrink * (hi - lo) / 2.0;
        let c = c.clamp(lo, hi);
        lower.push((c - half).max(lo));
        upper.push((c + half).min(hi));
    }
    (lower, upper)
}

pub fn run_stages(cfg: &RunConfig, seed: u64, sink: &mut dyn TraceSink) -> Result<RunOutcome> {
    let base = cfg.problem.build()?;
    let mut stages: Vec<StageOutcome> = Vec::new();
    for stage in 0..=cfg.restart.stages {
        let problem = match stages.last() {
            None => base.clone(),
            Some(prev) => {
                let (lo, hi) = shrunken_box(&base, &prev.result.best().x, cfg.restart.shrink);
                base.with_bounds(lo, hi)?
            }
        };
        let s = stage_seed(seed, stage);
        sink.begin_stage(stage)?;
        match run_optimization(&problem, &cfg.optimizer, s, sink) {
            Ok(result) => stages.push(StageOutcome {
                stage,
                seed: s,
                problem,
                result,
            }),
            Err(e) => {
                return Ok(RunOutcome {
                    stages,
                    error: Some(e),
                })
            }
        }
    }
    Ok(RunOutcome { stages, error: None })
}
