use std::path::Path;

use scoreopt::cli::main_with_args;

const SMALL: &[&str] = &[
    "--override",
    "optimizer.tn=5",
    "--override",
    "optimizer.train.steps=30",
    "--override",
    "optimizer.cold_steps=30",
    "--override",
    "optimizer.pool_size=512",
];

fn run(args: &[&str]) -> i32 {
    let mut all = vec!["scoreopt"];
    all.extend_from_slice(args);
    main_with_args(all)
}

fn run_fractal(out: &Path, seed: &str) -> i32 {
    let out = out.to_str().unwrap();
    let mut args = vec!["run", "--config", "fractal", "--seed", seed, "--out", out];
    args.extend_from_slice(SMALL);
    run(&args)
}

#[test]
fn run_writes_artifacts_with_one_solution_in_box() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_fractal(dir.path(), "5"), 0);
    for f in ["config.toml", "trace.csv", "timing.csv", "trajectory.csv", "objective.csv", "summary.json"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["format_version"], 1);
    assert_eq!(summary["status"], "ok");
    assert_eq!(summary["seed"], 5);
    let sols = summary["solutions"].as_array().unwrap();
    assert_eq!(sols.len(), 1);
    let x = sols[0]["x"][0].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&x));
    assert_eq!(summary["best"]["x"][0].as_f64().unwrap(), x);

    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let header = trace.lines().next().unwrap();
    assert_eq!(header, "stage,scale,t,phase,step,solution,fitness,grad_norm,step_norm,aux,grad_0");
    let width = header.split(',').count();
    assert!(trace.lines().all(|l| l.split(',').count() == width));
    for phase in ["pool", "train", "ascend"] {
        assert!(trace.lines().any(|l| l.split(',').nth(3) == Some(phase)), "no {phase} rows");
    }
    let objective = std::fs::read_to_string(dir.path().join("objective.csv")).unwrap();
    assert_eq!(objective.lines().count(), 1 + 1001);
}

#[test]
fn same_seed_gives_byte_identical_outputs() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(run_fractal(a.path(), "11"), 0);
    assert_eq!(run_fractal(b.path(), "11"), 0);
    assert_eq!(run_fractal(c.path(), "12"), 0);
    for f in ["trace.csv", "trajectory.csv", "summary.json", "config.toml"] {
        let (x, y) = (std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
        assert!(x == y, "{f} differs between identical runs");
    }
    assert_ne!(
        std::fs::read(a.path().join("trace.csv")).unwrap(),
        std::fs::read(c.path().join("trace.csv")).unwrap()
    );
}

#[test]
fn written_config_reproduces_the_run() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(run_fractal(a.path(), "4"), 0);
    let cfg = a.path().join("config.toml");
    assert_eq!(run(&["run", "--config", cfg.to_str().unwrap(), "--out", b.path().to_str().unwrap()]), 0);
    assert_eq!(
        std::fs::read(a.path().join("trace.csv")).unwrap(),
        std::fs::read(b.path().join("trace.csv")).unwrap()
    );
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(&["run", "--config", "no-such-preset", "--seed", "1", "--out", out]), 2);
    assert_eq!(run(&["run", "--config", "fractal", "--out", out]), 2, "missing seed");
    assert_eq!(run(&["run", "--config", "fractal", "--seed", "1", "--override", "optimizer.bogus=1"]), 2);
    assert_eq!(run(&["run", "--config", "fractal", "--seed", "1", "--override", "problem.id=nope"]), 2);
    assert_eq!(run(&["run", "--config", "fractal", "--seed", "1", "--override", "optimizer.tn=-3"]), 2);
    assert_eq!(run(&["bench", "--suite", "nope", "--seeds", ""]), 2);
    assert_eq!(run(&["bench", "--suite", "fractal", "--seeds", "3-1"]), 2);
    assert_eq!(run(&["no-such-command"]), 2);
}

#[test]
fn infeasible_problem_exits_1_with_partial_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec!["run", "--config", "fractal", "--seed", "1", "--out", out];
    args.extend_from_slice(SMALL);
    // A single candidate point; its fitness spread is zero, so the pool cannot be weighted.
    args.extend_from_slice(&["--override", "optimizer.pool_size=1"]);
    let code = run(&args);
    if code == 1 {
        let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["status"], "aborted");
        assert!(summary["error"].as_str().unwrap().contains("scale"));
    } else {
        assert_eq!(code, 2);
    }
}

#[test]
fn bench_with_no_seeds_runs_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(&["bench", "--suite", "fractal", "--seeds", "", "--out", out]), 0);
    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn list_problems_succeeds() {
    assert_eq!(run(&["list-problems"]), 0);
}

#[test]
fn oracle_check_exit_codes() {
    assert_eq!(run(&["oracle-check"]), 0);
    assert_eq!(run(&["oracle-check", "--flip-score-sign"]), 1);
}
