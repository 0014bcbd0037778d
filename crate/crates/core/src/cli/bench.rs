//! Replicate runs over a list of seeds, scored against brute-force grid
//! optima computed before the runs.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::config::{load_preset, RunConfig};
use super::output::fmt_f64;
use super::runner::{run_stages, RunOutcome};
use crate::error::{Error, Result};
use crate::optimizer::NullSink;
use crate::problems::{fractal_objective, multimodal_fractal, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Fractal,
    FractalMultimodal,
    F4,
    Circles2,
}

pub const SUITES: &[(&str, Suite)] = &[
    ("fractal", Suite::Fractal),
    ("fractal-mm", Suite::FractalMultimodal),
    ("f4", Suite::F4),
    ("circles2", Suite::Circles2),
];

impl Suite {
    pub fn by_name(name: &str) -> Option<Suite> {
        SUITES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
    }

    pub fn name(self) -> &'static str {
        SUITES.iter().find(|(_, s)| *s == self).map(|(n, _)| *n).expect("registered")
    }

    pub fn preset(self) -> &'static str {
        self.name()
    }

    /// Named success checks with the minimum passing fraction of seeds.
    pub fn checks(self) -> &'static [(&'static str, f64)] {
        match self {
            Suite::Fractal => &[("near_optimum", 0.9)],
            Suite::FractalMultimodal => &[("both_optima", 0.8)],
            Suite::F4 => &[("first_stage_below_1", 0.7), ("refined_within_0.05", 0.7)],
            Suite::Circles2 => &[("within_1pct", 1.0)],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Minimizers of a 1-D objective on a uniform grid of `points` nodes over
/// `[lo, hi]`, best first.
pub fn grid_minimum_1d(f: impl Fn(f64) -> f64 + Sync, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    (0..points)
        .into_par_iter()
        .map(|k| {
            let x = lo + (hi - lo) * k as f64 / (points - 1) as f64;
            (x, f(x))
        })
        .reduce(|| (f64::NAN, f64::INFINITY), |a, b| if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a })
}

pub const FRACTAL_GRID: usize = (1 << 20) + 1;

pub fn fractal_optimum(depth: usize) -> f64 {
    grid_minimum_1d(|x| fractal_objective(x, depth), 0.0, 1.0, FRACTAL_GRID).0
}

/// The two mirrored minimizers: the grid best and the best grid point more
/// than 0.3 away from it.
pub fn multimodal_optima(depth: usize) -> [f64; 2] {
    let (x1, _) = grid_minimum_1d(|x| multimodal_fractal(x, depth), 0.0, 1.0, FRACTAL_GRID);
    let (x2, _) = grid_minimum_1d(
        |x| if (x - x1).abs() > 0.3 { multimodal_fractal(x, depth) } else { f64::INFINITY },
        0.0,
        1.0,
        FRACTAL_GRID,
    );
    let mut out = [x1, x2];
    out.sort_by(f64::total_cmp);
    out
}

/// Two circles in the unit square with centers fixed: the best radii give
/// `min(d1 + d2, |c1 - c2|)` where `d_i` is the distance of center i to the
/// nearest wall. Independent of the LP used by the problem itself.
pub fn two_circle_value(c: &[f64; 4]) -> f64 {
    let wall = |x: f64, y: f64| x.min(1.0 - x).min(y).min(1.0 - y).max(0.0);
    let d = wall(c[0], c[1]) + wall(c[2], c[3]);
    let dist = ((c[0] - c[2]).powi(2) + (c[1] - c[3]).powi(2)).sqrt();
    d.min(dist)
}

fn grid_max_4d(lo: [f64; 4], step: f64, counts: [usize; 4]) -> ([f64; 4], f64) {
    (0..counts[0])
        .into_par_iter()
        .map(|i| {
            let mut best = ([0.0; 4], f64::NEG_INFINITY);
            for j in 0..counts[1] {
                for k in 0..counts[2] {
                    for l in 0..counts[3] {
                        let c = [
                            lo[0] + i as f64 * step,
                            lo[1] + j as f64 * step,
                            lo[2] + k as f64 * step,
                            lo[3] + l as f64 * step,
                        ];
                        if c.iter().any(|v| !(0.0..=1.0).contains(v)) {
                            continue;
                        }
                        let v = two_circle_value(&c);
                        if v > best.1 {
                            best = (c, v);
                        }
                    }
                }
            }
            best
        })
        .reduce(|| ([0.0; 4], f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
}

/// Grid optimum for two circles: a 0.02 grid over both centers, then a 1e-3
/// grid on the +-0.02 neighbourhood of the coarse winner.
pub fn two_circle_optimum() -> ([f64; 4], f64) {
    let (coarse, _) = grid_max_4d([0.0; 4], 0.02, [51; 4]);
    let lo = coarse.map(|v| (v - 0.02).max(0.0));
    let (fine, v) = grid_max_4d(lo, 1e-3, [41; 4]);
    (fine, v)
}

#[derive(Debug, Clone)]
pub struct SeedRow {
    pub seed: u64,
    pub error: Option<String>,
    /// Best final objective (native units).
    pub objective: f64,
    pub x: Vec<f64>,
    pub passed: Vec<bool>,
    /// Suite-specific measurements, named by `SuiteReport::detail_names`.
    pub details: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: Suite,
    pub check_names: Vec<&'static str>,
    pub detail_names: Vec<&'static str>,
    pub rows: Vec<SeedRow>,
}

impl SuiteReport {
    pub fn passed_count(&self, check: usize) -> usize {
        self.rows.iter().filter(|r| r.passed[check]).count()
    }

    pub fn required(&self, check: usize) -> usize {
        let frac = self.suite.checks()[check].1;
        (frac * self.rows.len() as f64 - 1e-9).ceil() as usize
    }

    pub fn success(&self) -> bool {
        (0..self.check_names.len()).all(|c| self.passed_count(c) >= self.required(c))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        let dim = self.rows.iter().map(|r| r.x.len()).max().unwrap_or(0);
        let mut header = vec!["seed".to_string(), "status".into(), "objective".into()];
        header.extend((0..dim).map(|d| format!("x_{d}")));
        header.extend(self.check_names.iter().map(|s| s.to_string()));
        header.extend(self.detail_names.iter().map(|s| s.to_string()));
        writeln!(w, "{}", header.join(","))?;
        for r in &self.rows {
            let mut row = vec![r.seed.to_string(), if r.error.is_some() { "error".into() } else { "ok".into() }, fmt_f64(r.objective)];
            row.extend((0..dim).map(|d| r.x.get(d).map(|v| fmt_f64(*v)).unwrap_or_default()));
            row.extend(r.passed.iter().map(|p| (*p as u8).to_string()));
            row.extend(r.details.iter().map(|v| fmt_f64(*v)));
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let checks: Vec<String> = self
                .check_names
                .iter()
                .zip(&r.passed)
                .map(|(n, p)| format!("{n}={}", if *p { "pass" } else { "FAIL" }))
                .collect();
            let x: Vec<String> = r.x.iter().map(|v| format!("{v:.5}")).collect();
            match &r.error {
                Some(e) => s.push_str(&format!("seed {:>4}  error: {e}\n", r.seed)),
                None => s.push_str(&format!("seed {:>4}  objective {:<12.6} x [{}]  {}\n", r.seed, r.objective, x.join(", "), checks.join(" "))),
            }
        }
        for (c, name) in self.check_names.iter().enumerate() {
            s.push_str(&format!(
                "{} {name}: {}/{} (need {})\n",
                self.suite,
                self.passed_count(c),
                self.rows.len(),
                self.required(c)
            ));
        }
        s
    }
}

enum Oracle {
    Point(f64),
    Pair([f64; 2]),
    Value(f64),
    None,
}

fn oracle_for(suite: Suite, cfg: &RunConfig) -> Oracle {
    let depth = cfg.problem.depth.unwrap_or(crate::problems::fractal::DEFAULT_DEPTH);
    match suite {
        Suite::Fractal => Oracle::Point(fractal_optimum(depth)),
        Suite::FractalMultimodal => Oracle::Pair(multimodal_optima(depth)),
        Suite::Circles2 => Oracle::Value(two_circle_optimum().1),
        Suite::F4 => Oracle::None,
    }
}

fn score(suite: Suite, oracle: &Oracle, seed: u64, outcome: &RunOutcome) -> SeedRow {
    let n_checks = suite.checks().len();
    let mut row = SeedRow {
        seed,
        error: outcome.error.as_ref().map(|e| e.to_string()),
        objective: f64::NAN,
        x: Vec::new(),
        passed: vec![false; n_checks],
        details: Vec::new(),
    };
    let Some(last) = outcome.last() else {
        return row;
    };
    let best = last.result.best();
    row.objective = best.objective;
    row.x = best.x.clone();
    let complete = outcome.error.is_none();
    match (suite, oracle) {
        (Suite::Fractal, Oracle::Point(opt)) => {
            let err = (best.x[0] - opt).abs();
            row.passed[0] = complete && err < 0.02;
            row.details = vec![*opt, err];
        }
        (Suite::FractalMultimodal, Oracle::Pair(opts)) => {
            let errs: Vec<f64> = opts
                .iter()
                .map(|o| last.result.solutions.iter().map(|s| (s.x[0] - o).abs()).fold(f64::INFINITY, f64::min))
                .collect();
            row.passed[0] = complete && errs.iter().all(|e| *e < 0.02);
            row.details = vec![opts[0], errs[0], opts[1], errs[1], last.result.solutions.len() as f64];
        }
        (Suite::F4, _) => {
            let first = outcome.stages[0].result.best().objective;
            let max_abs = best.x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            row.passed[0] = first < 1.0;
            row.passed[1] = complete && outcome.stages.len() > 1 && max_abs < 0.05;
            row.details = vec![first, max_abs];
        }
        (Suite::Circles2, Oracle::Value(v)) => {
            let rel = (v - best.objective) / v;
            row.passed[0] = complete && rel < 0.01;
            row.details = vec![*v, rel];
        }
        _ => {}
    }
    row
}

fn detail_names(suite: Suite) -> Vec<&'static str> {
    match suite {
        Suite::Fractal => vec!["x_opt", "abs_error"],
        Suite::FractalMultimodal => vec!["x_opt_1", "abs_error_1", "x_opt_2", "abs_error_2", "solutions"],
        Suite::F4 => vec!["first_stage_objective", "final_max_abs_x"],
        Suite::Circles2 => vec!["grid_optimum", "rel_gap"],
    }
}

/// Runs `suite` for every seed. The config is the suite preset plus
/// `overrides`. `progress` is called after each seed.
pub fn run_suite(suite: Suite, seeds: &[u64], overrides: &[String], mut progress: impl FnMut(&SeedRow)) -> Result<SuiteReport> {
    let cfg = load_preset(suite.preset(), overrides)?;
    let oracle = if seeds.is_empty() { Oracle::None } else { oracle_for(suite, &cfg) };
    let mut rows = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let outcome = run_stages(&cfg, seed, &mut NullSink)?;
        let row = score(suite, &oracle, seed, &outcome);
        progress(&row);
        rows.push(row);
    }
    Ok(SuiteReport {
        suite,
        check_names: suite.checks().iter().map(|c| c.0).collect(),
        detail_names: detail_names(suite),
        rows,
    })
}

/// `1,2,5` or `1-10` (inclusive), or a mix; empty string gives no seeds.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || Error::Config(format!("bad seed list entry `{part}`"));
        if let Some((a, b)) = part.split_once('-') {
            let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            if b < a {
                return Err(bad());
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    Ok(out)
}

/// Used by tests to check a problem against a grid oracle.
pub fn problem_grid_minimum_1d(problem: &Problem, points: usize) -> (f64, f64) {
    let (lo, hi) = (problem.lower()[0], problem.upper()[0]);
    grid_minimum_1d(|x| problem.objective(&[x]), lo, hi, points)
}
