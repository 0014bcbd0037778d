//! Run artifacts: trace and timing tables, plot series and the JSON summary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::optimizer::{Phase, RunResult, SolutionReport, TraceRecord, TraceSink};
use crate::problems::{Problem, Sense};

pub const FORMAT_VERSION: u32 = 1;

/// Shortest round-trip decimal, switching to exponent form for very small or
/// large magnitudes; NaN becomes an empty field.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v == 0.0 || (1e-4..1e15).contains(&v.abs()) || v.is_infinite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Streams trace rows to `trace.csv` and wall times to `timing.csv`, flushing
/// at the end of every scale so the files stay parseable after an abort.
pub struct CsvSink {
    trace: BufWriter<File>,
    timing: BufWriter<File>,
    dim: usize,
    stage: usize,
}

impl CsvSink {
    pub fn create(dir: &Path, dim: usize) -> Result<Self> {
        let mut trace = BufWriter::new(File::create(dir.join("trace.csv"))?);
        let mut header = String::from("stage,scale,t,phase,step,solution,fitness,grad_norm,step_norm,aux");
        for d in 0..dim {
            header.push_str(&format!(",grad_{d}"));
        }
        writeln!(trace, "{header}")?;
        let mut timing = BufWriter::new(File::create(dir.join("timing.csv"))?);
        writeln!(timing, "stage,scale,phase,seconds")?;
        trace.flush()?;
        timing.flush()?;
        Ok(Self { trace, timing, dim, stage: 0 })
    }

    pub fn flush(&mut self) -> Result<()> {
        self.trace.flush()?;
        self.timing.flush()?;
        Ok(())
    }
}

pub fn trace_row(stage: usize, r: &TraceRecord, dim: usize) -> String {
    let mut row = format!(
        "{stage},{},{},{},{},{},{},{},{},{}",
        r.scale,
        fmt_f64(r.t),
        r.phase,
        r.step,
        r.solution.map(|s| s.to_string()).unwrap_or_default(),
        fmt_f64(r.fitness),
        fmt_f64(r.grad_norm),
        fmt_f64(r.step_norm),
        fmt_f64(r.aux),
    );
    for d in 0..dim {
        row.push(',');
        row.push_str(&r.grad.get(d).map(|g| fmt_f64(*g)).unwrap_or_default());
    }
    row
}

impl TraceSink for CsvSink {
    fn record(&mut self, rec: &TraceRecord) -> Result<()> {
        let row = trace_row(self.stage, rec, self.dim);
        writeln!(self.trace, "{row}")?;
        Ok(())
    }

    fn begin_stage(&mut self, stage: usize) -> Result<()> {
        self.stage = stage;
        Ok(())
    }

    fn timing(&mut self, scale: usize, phase: Phase, seconds: f64) -> Result<()> {
        writeln!(self.timing, "{},{scale},{phase},{seconds:.6}", self.stage)?;
        if phase == Phase::Explore {
            self.flush()?;
        }
        Ok(())
    }
}

/// Objective samples over the box: a curve for 1-D problems, axis slices
/// through `through` (native coordinates) otherwise.
pub fn write_objective_curve(path: &Path, problem: &Problem, through: &[f64], samples: usize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let samples = samples.max(2);
    let n = problem.dim();
    if n == 1 {
        writeln!(w, "x,objective")?;
    } else {
        writeln!(w, "axis,x,objective")?;
    }
    for d in 0..n {
        let (lo, hi) = (problem.lower()[d], problem.upper()[d]);
        for k in 0..samples {
            let v = lo + (hi - lo) * k as f64 / (samples - 1) as f64;
            let mut x = through.to_vec();
            x[d] = v;
            let y = if problem.is_feasible(&x) { problem.objective(&x) } else { f64::NAN };
            if n == 1 {
                writeln!(w, "{},{}", fmt_f64(v), fmt_f64(y))?;
            } else {
                writeln!(w, "{d},{},{}", fmt_f64(v), fmt_f64(y))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub struct TrajectoryWriter {
    w: BufWriter<File>,
}

impl TrajectoryWriter {
    pub fn create(path: &Path, dim: usize) -> Result<Self> {
        let mut w = BufWriter::new(File::create(path)?);
        let mut header = String::from("stage,scale,t,solution");
        for d in 0..dim {
            header.push_str(&format!(",x_{d}"));
        }
        writeln!(w, "{header}")?;
        Ok(Self { w })
    }

    pub fn append(&mut self, stage: usize, problem: &Problem, result: &RunResult) -> Result<()> {
        for p in &result.trajectory {
            let x = problem.denormalize(&p.x_normalized);
            let coords: Vec<String> = x.iter().map(|v| fmt_f64(*v)).collect();
            writeln!(self.w, "{stage},{},{},{},{}", p.scale, fmt_f64(p.t), p.solution, coords.join(","))?;
        }
        self.w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProblemInfo {
    pub id: String,
    pub dim: usize,
    pub sense: &'static str,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ProblemInfo {
    pub fn of(p: &Problem) -> Self {
        Self {
            id: p.id.clone(),
            dim: p.dim(),
            sense: match p.sense {
                Sense::Minimize => "minimize",
                Sense::Maximize => "maximize",
            },
            lower: p.lower().to_vec(),
            upper: p.upper().to_vec(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageSummary {
    pub stage: usize,
    pub seed: u64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub solutions: Vec<SolutionReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub format_version: u32,
    pub status: &'static str,
    pub error: Option<String>,
    pub seed: u64,
    pub config_hash: String,
    /// Resolved config as TOML; feeding it back reproduces the run.
    pub config: String,
    pub problem: ProblemInfo,
    pub stages: Vec<StageSummary>,
    pub best: Option<SolutionReport>,
    pub solutions: Vec<SolutionReport>,
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary).expect("summary serializes");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
