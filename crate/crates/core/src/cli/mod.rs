//! Command-line front end: `run`, `bench`, `oracle-check`, `list-problems`.

pub mod bench;
pub mod checks;
pub mod config;
pub mod output;
pub mod runner;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::optimizer::ExploreConfig;
use crate::problems::REGISTRY;
use config::RunConfig;
use output::{CsvSink, ProblemInfo, StageSummary, Summary, TrajectoryWriter, FORMAT_VERSION};

#[derive(Debug, Parser)]
#[command(name = "scoreopt", version, about = "Global optimization by annealed score-based gradient ascent")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One seeded run; writes summary.json, trace.csv, timing.csv and plot data.
    Run {
        /// TOML config file, or the name of a built-in preset.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// `key.path=value`, applied in order after the config file.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, value_enum)]
        local_prior: Option<Switch>,
        #[arg(long, value_enum)]
        explore: Option<Switch>,
    },
    /// Replicate runs of a benchmark suite, scored against grid optima.
    Bench {
        #[arg(long)]
        suite: String,
        /// e.g. `1-10` or `1,4,9`; empty runs nothing.
        #[arg(long, default_value = "1-10")]
        seeds: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Cross-oracle identity and gradient checks.
    OracleCheck {
        /// Negative control: corrupt one score form; the run must fail.
        #[arg(long, hide = true)]
        flip_score_sign: bool,
    },
    /// Registered problems, presets and bench suites.
    ListProblems,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::UnknownProblem(_) => 2,
        _ => 1,
    }
}

/// Parses arguments and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Run {
            config,
            seed,
            out,
            overrides,
            local_prior,
            explore,
        } => {
            let mut cfg = config::load(&config, &overrides)?;
            if let Some(s) = seed {
                cfg.seed = Some(s);
            }
            if let Some(o) = out {
                cfg.out = Some(o);
            }
            if let Some(sw) = local_prior {
                cfg.optimizer.local_prior = sw == Switch::On;
            }
            match explore {
                Some(Switch::On) if cfg.optimizer.explore.is_none() => cfg.optimizer.explore = Some(ExploreConfig::default()),
                Some(Switch::Off) => cfg.optimizer.explore = None,
                _ => {}
            }
            cfg.validate()?;
            cmd_run(&cfg)
        }
        Command::Bench {
            suite,
            seeds,
            out,
            overrides,
        } => {
            let s = bench::Suite::by_name(&suite).ok_or_else(|| {
                let names: Vec<&str> = bench::SUITES.iter().map(|s| s.0).collect();
                Error::Config(format!("unknown suite `{suite}` (known: {})", names.join(", ")))
            })?;
            let seeds = bench::parse_seeds(&seeds)?;
            let report = bench::run_suite(s, &seeds, &overrides, |row| match &row.error {
                Some(e) => eprintln!("seed {}: error: {e}", row.seed),
                None => eprintln!("seed {}: objective {}", row.seed, row.objective),
            })?;
            print!("{}", report.render());
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                report.write_csv(&dir.join("results.csv"))?;
            }
            Ok(if report.success() { 0 } else { 1 })
        }
        Command::OracleCheck { flip_score_sign } => {
            let results = checks::run_checks(&checks::CheckOptions {
                flip_posterior_score_sign: flip_score_sign,
            });
            print!("{}", checks::render(&results));
            let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
            if failed.is_empty() {
                Ok(0)
            } else {
                eprintln!("failed: {}", failed.join(", "));
                Ok(1)
            }
        }
        Command::ListProblems => {
            println!("problems:");
            for (id, desc) in REGISTRY {
                println!("  {id:<14} {desc}");
            }
            println!("presets:");
            for (name, _) in config::PRESETS {
                println!("  {name}");
            }
            println!("bench suites:");
            for (name, suite) in bench::SUITES {
                let checks: Vec<String> = suite.checks().iter().map(|(c, f)| format!("{c} >= {:.0}%", f * 100.0)).collect();
                println!("  {name:<14} {}", checks.join(", "));
            }
            Ok(0)
        }
    }
}

/// Executes a validated config and writes its artifacts. Returns exit code 1
/// (after writing what exists) when the optimizer aborts.
pub fn cmd_run(cfg: &RunConfig) -> Result<i32> {
    let seed = cfg.seed()?;
    let problem = cfg.problem.build()?;
    let dir = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}-seed{seed}", problem.id)));
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("config.toml"), cfg.canonical_toml())?;
    let mut sink = CsvSink::create(&dir, problem.dim())?;
    let outcome = runner::run_stages(cfg, seed, &mut sink)?;
    sink.flush()?;
    write_run_artifacts(&dir, cfg, seed, &outcome)?;
    match &outcome.error {
        None => {
            if let Some(best) = outcome.last().map(|s| s.result.best()) {
                println!("best objective {} at {:?}", best.objective, best.x);
            }
            println!("wrote {}", dir.display());
            Ok(0)
        }
        Some(e) => {
            eprintln!("error: {e}");
            Ok(1)
        }
    }
}

fn write_run_artifacts(dir: &Path, cfg: &RunConfig, seed: u64, outcome: &runner::RunOutcome) -> Result<()> {
    let base = cfg.problem.build()?;
    let mut traj = TrajectoryWriter::create(&dir.join("trajectory.csv"), base.dim())?;
    for s in &outcome.stages {
        traj.append(s.stage, &s.problem, &s.result)?;
    }
    let last = outcome.last();
    let best = last.map(|s| s.result.best().clone());
    let through = best
        .as_ref()
        .map(|b| b.x.clone())
        .unwrap_or_else(|| base.denormalize(&vec![0.0; base.dim()]));
    output::write_objective_curve(&dir.join("objective.csv"), &base, &through, cfg.plot.objective_samples)?;
    let summary = Summary {
        format_version: FORMAT_VERSION,
        status: if outcome.error.is_none() { "ok" } else { "aborted" },
        error: outcome.error.as_ref().map(|e| e.to_string()),
        seed,
        config_hash: cfg.hash(),
        config: cfg.canonical_toml(),
        problem: ProblemInfo::of(&base),
        stages: outcome
            .stages
            .iter()
            .map(|s| StageSummary {
                stage: s.stage,
                seed: s.seed,
                lower: s.problem.lower().to_vec(),
                upper: s.problem.upper().to_vec(),
                solutions: s.result.solutions.clone(),
            })
            .collect(),
        best,
        solutions: last.map(|s| s.result.solutions.clone()).unwrap_or_default(),
    };
    output::write_summary(&dir.join("summary.json"), &summary)
}
