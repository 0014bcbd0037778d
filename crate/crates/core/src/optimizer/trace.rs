//! Per-scale trace records emitted by the outer loop.

use std::fmt;

use serde::Serialize;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pool,
    Train,
    Init,
    Ascend,
    Explore,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Pool => "pool",
            Phase::Train => "train",
            Phase::Init => "init",
            Phase::Ascend => "ascend",
            Phase::Explore => "explore",
        })
    }
}

/// One row of the trace. Fields that do not apply to a phase are NaN
/// (or `None`/empty).
///
/// For train rows `step` is the step whose parameters were kept.
///
/// `aux` holds: pool → calibrated temperature; train → final held-out loss;
/// init/ascend → objective in native units; explore → number of solutions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub scale: usize,
    pub t: f64,
    pub phase: Phase,
    pub step: usize,
    pub solution: Option<usize>,
    pub fitness: f64,
    pub grad_norm: f64,
    pub step_norm: f64,
    pub aux: f64,
    pub grad: Vec<f64>,
}

impl TraceRecord {
    pub fn new(scale: usize, t: f64, phase: Phase) -> Self {
        Self {
            scale,
            t,
            phase,
            step: 0,
            solution: None,
            fitness: f64::NAN,
            grad_norm: f64::NAN,
            step_norm: f64::NAN,
            aux: f64::NAN,
            grad: Vec::new(),
        }
    }

    /// Ordering key within a file: `(scale, phase, solution, step)`.
    pub fn sort_key(&self) -> (usize, Phase, Option<usize>, usize) {
        (self.scale, self.phase, self.solution, self.step)
    }
}

pub trait TraceSink {
    fn record(&mut self, rec: &TraceRecord) -> Result<()>;

    /// Called before each restart stage of a multi-stage run.
    fn begin_stage(&mut self, _stage: usize) -> Result<()> {
        Ok(())
    }

    /// Wall-clock time spent in a phase of a scale. Kept out of the trace so
    /// that traces are reproducible byte for byte.
    fn timing(&mut self, _scale: usize, _phase: Phase, _seconds: f64) -> Result<()> {
        Ok(())
    }
}

impl TraceSink for Vec<TraceRecord> {
    fn record(&mut self, rec: &TraceRecord) -> Result<()> {
        self.push(rec.clone());
        Ok(())
    }
}

/// Discards everything.
pub struct NullSink;

impl TraceSink for NullSink {
    fn record(&mut self, _rec: &TraceRecord) -> Result<()> {
        Ok(())
    }
}
