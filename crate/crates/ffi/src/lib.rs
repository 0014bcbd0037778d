//! C ABI over the scoreopt optimizer.
//!
//! Objects are opaque handles created by `*_new`/`*_from_*` functions and
//! released by the matching `*_free`. Every fallible call returns a
//! [`ScoreoptStatus`]; on failure the message is available from
//! [`scoreopt_last_error`] on the same thread until the next failing call.
//! Panics are caught at the boundary and reported as `SCOREOPT_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use scoreopt::cli::config::{self, RunConfig};
use scoreopt::cli::runner::{self, RunOutcome};
use scoreopt::optimizer::NullSink;
use scoreopt::problems::{Problem, ProblemSpec};
use scoreopt::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreoptStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    UnknownProblem = 4,
    DimensionMismatch = 5,
    /// Non-finite values, degenerate kernels, singular scales or divergence.
    Numerical = 6,
    EmptyFeasible = 7,
    /// The run stopped early; partial results are still returned.
    Aborted = 8,
    Io = 9,
    OutOfRange = 10,
    Panic = 11,
}

/// Resolved run configuration.
pub struct ScoreoptConfig(RunConfig);

/// Benchmark objective in native coordinates.
pub struct ScoreoptProblem(Problem);

/// Solutions of the last completed stage of a run.
pub struct ScoreoptResult {
    dim: usize,
    x: Vec<Vec<f64>>,
    objective: Vec<f64>,
    feasible: Vec<bool>,
    stages: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ScoreoptStatus {
    match e {
        Error::InvalidArgument(_) => ScoreoptStatus::InvalidArgument,
        Error::DimensionMismatch { .. } => ScoreoptStatus::DimensionMismatch,
        Error::DegenerateKernel { .. }
        | Error::SingularScale { .. }
        | Error::TrainingDiverged { .. }
        | Error::NonFinite { .. } => ScoreoptStatus::Numerical,
        Error::EmptyFeasible { .. } => ScoreoptStatus::EmptyFeasible,
        Error::Config(_) | Error::Checkpoint(_) => ScoreoptStatus::Config,
        Error::UnknownProblem(_) => ScoreoptStatus::UnknownProblem,
        Error::Aborted { .. } => ScoreoptStatus::Aborted,
        Error::Io(_) => ScoreoptStatus::Io,
    }
}

fn fail(status: ScoreoptStatus, msg: impl Into<String>) -> ScoreoptStatus {
    set_error(msg.into());
    status
}

fn fail_with(e: Error) -> ScoreoptStatus {
    let s = status_of(&e);
    fail(s, e.to_string())
}

/// Runs `f`, converting a panic into `Panic`.
fn guard(f: impl FnOnce() -> ScoreoptStatus) -> ScoreoptStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(ScoreoptStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, ScoreoptStatus> {
    if p.is_null() {
        return Err(fail(ScoreoptStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(ScoreoptStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn read_overrides(items: *const *const c_char, n: usize) -> Result<Vec<String>, ScoreoptStatus> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if items.is_null() {
        return Err(fail(ScoreoptStatus::NullPointer, "overrides is null"));
    }
    (0..n)
        .map(|i| read_str(*items.add(i), "override").map(str::to_string))
        .collect()
}

/// Message of the last failing call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn scoreopt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn scoreopt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Config from TOML text plus `key.path=value` overrides.
///
/// # Safety
/// `toml` must be a nul-terminated string; `overrides` must hold
/// `n_overrides` such strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn scoreopt_config_from_toml(
    toml: *const c_char,
    overrides: *const *const c_char,
    n_overrides: usize,
    out: *mut *mut ScoreoptConfig,
) -> ScoreoptStatus {
    guard(|| {
        if out.is_null() {
            return fail(ScoreoptStatus::NullPointer, "out is null");
        }
        let text = match read_str(toml, "toml") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let ov = match read_overrides(overrides, n_overrides) {
            Ok(o) => o,
            Err(s) => return s,
        };
        match config::parse(text, &ov) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(ScoreoptConfig(c)));
                ScoreoptStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}

/// Config from a built-in preset (`fractal`, `fractal-mm`, `f4`, ...).
///
/// # Safety
/// As for [`scoreopt_config_from_toml`].
#[no_mangle]
pub unsafe extern "C" fn scoreopt_config_from_preset(
    name: *const c_char,
    overrides: *const *const c_char,
    n_overrides: usize,
    out: *mut *mut ScoreoptConfig,
) -> ScoreoptStatus {
    guard(|| {
        if out.is_null() {
            return fail(ScoreoptStatus::NullPointer, "out is null");
        }
        let name = match read_str(name, "name") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let ov = match read_overrides(overrides, n_overrides) {
            Ok(o) => o,
            Err(s) => return s,
        };
        match config::load_preset(name, &ov) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(ScoreoptConfig(c)));
                ScoreoptStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}

/// Canonical TOML of the config; free with [`scoreopt_string_free`].
///
/// # Safety
/// `cfg` must be a live config handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn scoreopt_config_to_toml(cfg: *const ScoreoptConfig, out: *mut *mut c_char) -> ScoreoptStatus {
    guard(|| {
        if cfg.is_null() || out.is_null() {
            return fail(ScoreoptStatus::NullPointer, "null argument");
        }
        let text = (*cfg).0.canonical_toml().replace('\0', " ");
        *out = CString::new(text).expect("no interior nul").into_raw();
        ScoreoptStatus::Ok
    })
}

/// # Safety
/// `cfg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scoreopt_config_free(cfg: *mut ScoreoptConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scoreopt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Runs every stage of the config with `seed` (the config's own seed is
/// ignored). On `Aborted` the result of the last completed stage, if any, is
/// still stored in `out`; otherwise `out` is set to null.
///
/// # Safety
/// `cfg` must be a live config handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn scoreopt_run(cfg: *const ScoreoptConfig, seed: u64, out: *mut *mut ScoreoptResult) -> ScoreoptStatus {
    guard(|| {
        if cfg.is_null() || out.is_null() {
            return fail(ScoreoptStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        let outcome: RunOutcome = match runner::run_stages(&(*cfg).0, seed, &mut NullSink) {
            Ok(o) => o,
            Err(e) => return fail_with(e),
        };
        if let Some(last) = outcome.last() {
            let sols = &last.result.solutions;
            *out = Box::into_raw(Box::new(ScoreoptResult {
                dim: last.problem.dim(),
                x: sols.iter().map(|s| s.x.clone()).collect(),
                objective: sols.iter().map(|s| s.objective).collect(),
                feasible: sols.iter().map(|s| s.feasible).collect(),
                stages: outcome.stages.len(),
            }));
        }
        match outcome.error {
            None => ScoreoptStatus::Ok,
            Some(e) => fail_with(e),
        }
    })
}

/// # Safety
/// `res` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn scoreopt_result_dim(res: *const ScoreoptResult) -> usize {
    res.as_ref().map_or(0, |r| r.dim)
}

/// Number of solutions, best first.
///
/// # Safety
/// `res` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn scoreopt_result_len(res: *const ScoreoptResult) -> usize {
    res.as_ref().map_or(0, |r| r.x.len())
}

/// Number of completed stages.
///
/// # Safety
/// `res` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn scoreopt_result_stages(res: *const ScoreoptResult) -> usize {
    res.as_ref().map_or(0, |r| r.stages)
}

/// Copies solution `index` (native coordinates) into `x[0..len]`; `len` must
/// equal the dimension. The objective is NaN for infeasible points. `objective`
/// and `feasible` may be null.
///
/// # Safety
/// `res` must be a live result handle; `x` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn scoreopt_result_solution(
    res: *const ScoreoptResult,
    index: usize,
    x: *mut f64,
    len: usize,
    objective: *mut f64,
    feasible: *mut bool,
) -> ScoreoptStatus {
    guard(|| {
        let Some(r) = res.as_ref() else {
            return fail(ScoreoptStatus::NullPointer, "result is null");
        };
        if index >= r.x.len() {
            return fail(ScoreoptStatus::OutOfRange, format!("solution {index} of {}", r.x.len()));
        }
        if len != r.dim {
            return fail(ScoreoptStatus::DimensionMismatch, format!("expected {}, got {len}", r.dim));
        }
        if x.is_null() {
            return fail(ScoreoptStatus::NullPointer, "x is null");
        }
        std::slice::from_raw_parts_mut(x, len).copy_from_slice(&r.x[index]);
        if !objective.is_null() {
            *objective = r.objective[index];
        }
        if !feasible.is_null() {
            *feasible = r.feasible[index];
        }
        ScoreoptStatus::Ok
    })
}

/// # Safety
/// `res` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scoreopt_result_free(res: *mut ScoreoptResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Registered problem by id; `dim` 0 keeps the default dimension.
///
/// # Safety
/// `id` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn scoreopt_problem_new(id: *const c_char, dim: usize, out: *mut *mut ScoreoptProblem) -> ScoreoptStatus {
    guard(|| {
        if out.is_null() {
            return fail(ScoreoptStatus::NullPointer, "out is null");
        }
        let id = match read_str(id, "id") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let mut spec = ProblemSpec::new(id);
        if dim > 0 {
            spec.dim = Some(dim);
        }
        match spec.build() {
            Ok(p) => {
                *out = Box::into_raw(Box::new(ScoreoptProblem(p)));
                ScoreoptStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}

/// # Safety
/// `p` must be a live problem handle.
#[no_mangle]
pub unsafe extern "C" fn scoreopt_problem_dim(p: *const ScoreoptProblem) -> usize {
    p.as_ref().map_or(0, |p| p.0.dim())
}

/// Copies the native box into `lower[0..len]` and `upper[0..len]`.
///
/// # Safety
/// `p` must be a live problem handle; `lower` and `upper` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn scoreopt_problem_bounds(
    p: *const ScoreoptProblem,
    lower: *mut f64,
    upper: *mut f64,
    len: usize,
) -> ScoreoptStatus {
    guard(|| {
        let Some(p) = p.as_ref() else {
            return fail(ScoreoptStatus::NullPointer, "problem is null");
        };
        if len != p.0.dim() {
            return fail(ScoreoptStatus::DimensionMismatch, format!("expected {}, got {len}", p.0.dim()));
        }
        if lower.is_null() || upper.is_null() {
            return fail(ScoreoptStatus::NullPointer, "bounds buffer is null");
        }
        std::slice::from_raw_parts_mut(lower, len).copy_from_slice(p.0.lower());
        std::slice::from_raw_parts_mut(upper, len).copy_from_slice(p.0.upper());
        ScoreoptStatus::Ok
    })
}

/// Raw objective at native `x[0..len]`; `feasible` (nullable) reports the
/// constraint predicate.
///
/// # Safety
/// `p` must be a live problem handle; `x` must hold `len` doubles; `value`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn scoreopt_problem_objective(
    p: *const ScoreoptProblem,
    x: *const f64,
    len: usize,
    value: *mut f64,
    feasible: *mut bool,
) -> ScoreoptStatus {
    guard(|| {
        let Some(p) = p.as_ref() else {
            return fail(ScoreoptStatus::NullPointer, "problem is null");
        };
        if len != p.0.dim() {
            return fail(ScoreoptStatus::DimensionMismatch, format!("expected {}, got {len}", p.0.dim()));
        }
        if x.is_null() || value.is_null() {
            return fail(ScoreoptStatus::NullPointer, "null argument");
        }
        let x = std::slice::from_raw_parts(x, len);
        *value = p.0.objective(x);
        if !feasible.is_null() {
            *feasible = p.0.is_feasible(x);
        }
        ScoreoptStatus::Ok
    })
}

/// # Safety
/// `p` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scoreopt_problem_free(p: *mut ScoreoptProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}
