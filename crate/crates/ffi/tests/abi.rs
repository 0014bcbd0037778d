use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use scoreopt_ffi::*;

fn last_error() -> String {
    let p = scoreopt_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn small_config() -> *mut ScoreoptConfig {
    let name = CString::new("fractal").unwrap();
    let ov: Vec<CString> = [
        "optimizer.tn=4",
        "optimizer.train.steps=20",
        "optimizer.cold_steps=20",
        "optimizer.pool_size=512",
    ]
    .iter()
    .map(|s| CString::new(*s).unwrap())
    .collect();
    let ptrs: Vec<*const c_char> = ov.iter().map(|s| s.as_ptr()).collect();
    let mut cfg = ptr::null_mut();
    let st = unsafe { scoreopt_config_from_preset(name.as_ptr(), ptrs.as_ptr(), ptrs.len(), &mut cfg) };
    assert_eq!(st, ScoreoptStatus::Ok);
    cfg
}

fn run(cfg: *const ScoreoptConfig, seed: u64) -> Vec<(f64, f64, bool)> {
    let mut res = ptr::null_mut();
    assert_eq!(unsafe { scoreopt_run(cfg, seed, &mut res) }, ScoreoptStatus::Ok);
    assert_eq!(unsafe { scoreopt_result_dim(res) }, 1);
    assert_eq!(unsafe { scoreopt_result_stages(res) }, 1);
    let n = unsafe { scoreopt_result_len(res) };
    assert!(n >= 1);
    let out = (0..n)
        .map(|i| {
            let (mut x, mut f, mut feas) = (0.0, 0.0, false);
            assert_eq!(unsafe { scoreopt_result_solution(res, i, &mut x, 1, &mut f, &mut feas) }, ScoreoptStatus::Ok);
            (x, f, feas)
        })
        .collect();
    unsafe { scoreopt_result_free(res) };
    out
}

#[test]
fn run_through_handles_is_deterministic() {
    let cfg = small_config();
    let a = run(cfg, 3);
    let b = run(cfg, 3);
    unsafe { scoreopt_config_free(cfg) };
    assert_eq!(a.iter().map(|s| s.0.to_bits()).collect::<Vec<_>>(), b.iter().map(|s| s.0.to_bits()).collect::<Vec<_>>());
    let (x, f, feasible) = a[0];
    assert!((0.0..=1.0).contains(&x));
    assert!(feasible && f.is_finite());
}

#[test]
fn result_accessors_check_bounds_and_dimension() {
    let cfg = small_config();
    let mut res = ptr::null_mut();
    assert_eq!(unsafe { scoreopt_run(cfg, 1, &mut res) }, ScoreoptStatus::Ok);
    let mut x = [0.0; 2];
    let n = unsafe { scoreopt_result_len(res) };
    let st = unsafe { scoreopt_result_solution(res, n, x.as_mut_ptr(), 1, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(st, ScoreoptStatus::OutOfRange);
    let st = unsafe { scoreopt_result_solution(res, 0, x.as_mut_ptr(), 2, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(st, ScoreoptStatus::DimensionMismatch);
    assert!(last_error().contains("expected 1"));
    unsafe {
        scoreopt_result_free(res);
        scoreopt_config_free(cfg);
    }
}

#[test]
fn config_errors_map_to_status_codes() {
    let mut cfg = ptr::null_mut();
    let bad = CString::new("seed = 1\n[problem]\nid = \"nope\"\n").unwrap();
    let st = unsafe { scoreopt_config_from_toml(bad.as_ptr(), ptr::null(), 0, &mut cfg) };
    assert_eq!(st, ScoreoptStatus::UnknownProblem);
    assert!(cfg.is_null());
    assert!(last_error().contains("nope"));

    let bad = CString::new("[problem]\nid = \"fractal\"\n[optimizer]\nbogus = 1\n").unwrap();
    let st = unsafe { scoreopt_config_from_toml(bad.as_ptr(), ptr::null(), 0, &mut cfg) };
    assert_eq!(st, ScoreoptStatus::Config);

    let st = unsafe { scoreopt_config_from_toml(ptr::null(), ptr::null(), 0, &mut cfg) };
    assert_eq!(st, ScoreoptStatus::NullPointer);

    let name = CString::new("no-such-preset").unwrap();
    let st = unsafe { scoreopt_config_from_preset(name.as_ptr(), ptr::null(), 0, &mut cfg) };
    assert_eq!(st, ScoreoptStatus::Config);
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = small_config();
    let mut text = ptr::null_mut();
    assert_eq!(unsafe { scoreopt_config_to_toml(cfg, &mut text) }, ScoreoptStatus::Ok);
    let mut again = ptr::null_mut();
    assert_eq!(unsafe { scoreopt_config_from_toml(text, ptr::null(), 0, &mut again) }, ScoreoptStatus::Ok);
    let mut text2 = ptr::null_mut();
    assert_eq!(unsafe { scoreopt_config_to_toml(again, &mut text2) }, ScoreoptStatus::Ok);
    unsafe {
        assert_eq!(CStr::from_ptr(text), CStr::from_ptr(text2));
        scoreopt_string_free(text);
        scoreopt_string_free(text2);
        scoreopt_config_free(cfg);
        scoreopt_config_free(again);
    }
}

#[test]
fn problem_handle_evaluates_objective() {
    let id = CString::new("f4-2017").unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { scoreopt_problem_new(id.as_ptr(), 3, &mut p) }, ScoreoptStatus::Ok);
    assert_eq!(unsafe { scoreopt_problem_dim(p) }, 3);
    let (mut lo, mut hi) = ([0.0; 3], [0.0; 3]);
    assert_eq!(unsafe { scoreopt_problem_bounds(p, lo.as_mut_ptr(), hi.as_mut_ptr(), 3) }, ScoreoptStatus::Ok);
    assert_eq!((lo, hi), ([-100.0; 3], [100.0; 3]));
    let (mut v, mut feas) = (f64::NAN, false);
    let x = [0.0; 3];
    assert_eq!(unsafe { scoreopt_problem_objective(p, x.as_ptr(), 3, &mut v, &mut feas) }, ScoreoptStatus::Ok);
    assert!(v.abs() < 1e-12 && feas);
    assert_eq!(
        unsafe { scoreopt_problem_objective(p, x.as_ptr(), 2, &mut v, ptr::null_mut()) },
        ScoreoptStatus::DimensionMismatch
    );
    unsafe { scoreopt_problem_free(p) };

    let id = CString::new("unknown").unwrap();
    assert_eq!(unsafe { scoreopt_problem_new(id.as_ptr(), 0, &mut p) }, ScoreoptStatus::UnknownProblem);
}

#[test]
fn null_handles_are_tolerated() {
    unsafe {
        scoreopt_config_free(ptr::null_mut());
        scoreopt_result_free(ptr::null_mut());
        scoreopt_problem_free(ptr::null_mut());
        scoreopt_string_free(ptr::null_mut());
        assert_eq!(scoreopt_result_len(ptr::null()), 0);
        let mut res = ptr::null_mut();
        assert_eq!(scoreopt_run(ptr::null(), 1, &mut res), ScoreoptStatus::NullPointer);
    }
    let v = unsafe { CStr::from_ptr(scoreopt_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/scoreopt.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["scoreopt_run", "scoreopt_last_error", "SCOREOPT_STATUS_ABORTED", "typedef struct ScoreoptResult"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler; skipping syntax check");
        return;
    };
    let out = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(dir.join("examples/minimize.c"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "clang", "gcc"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
        .ok_or(())
}
