// SPDX-License-Identifier: Apache-2.0

//! C ABI over `pinn-core`.
//!
//! Every function returns a [`PinnStatus`]; on failure a message is kept per
//! thread and can be read with [`pinn_last_error`]. Handles returned through
//! out-pointers are owned by the caller and released with the matching
//! `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use pinn_core::config::{parse_config, ExperimentConfig};
use pinn_core::harness::{self, Benchmark, ExperimentResult};
use pinn_core::network::{self, ParamSet};
use pinn_core::PinnError;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PinnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidString = 2,
    Config = 3,
    Usage = 4,
    Domain = 5,
    NonFinite = 6,
    Io = 7,
    Parse = 8,
    Eval = 9,
    Resolution = 10,
    OutOfRange = 11,
    Panic = 12,
}

/// Experiment configuration handle.
pub struct PinnConfig(ExperimentConfig);

/// Finished experiment handle.
pub struct PinnResult(ExperimentResult);

/// Trained network parameters handle.
pub struct PinnParams(ParamSet);

/// Final test-MSE statistics over non-diverged trials. The statistics are
/// NaN when `has_stats` is 0.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct PinnSummary {
    pub trials: usize,
    pub diverged: usize,
    pub has_stats: i32,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &PinnError) -> PinnStatus {
    match e {
        PinnError::Eval(_) => PinnStatus::Eval,
        PinnError::Usage(_) => PinnStatus::Usage,
        PinnError::Domain(_) => PinnStatus::Domain,
        PinnError::NonFinite(_) => PinnStatus::NonFinite,
        PinnError::Resolution(_) => PinnStatus::Resolution,
        PinnError::Config(_) => PinnStatus::Config,
        PinnError::Parse(_) => PinnStatus::Parse,
        PinnError::Io(_) => PinnStatus::Io,
    }
}

struct Fail(PinnStatus, String);

impl From<PinnError> for Fail {
    fn from(e: PinnError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PinnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PinnStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PinnStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    // SAFETY: callers pass either null or a pointer obtained from this library.
    unsafe { p.as_ref() }.ok_or_else(|| Fail(PinnStatus::NullPointer, format!("{what} is null")))
}

fn non_null_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    // SAFETY: as above; the caller guarantees exclusive access.
    unsafe { p.as_mut() }.ok_or_else(|| Fail(PinnStatus::NullPointer, format!("{what} is null")))
}

fn string_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(PinnStatus::NullPointer, format!("{what} is null")));
    }
    // SAFETY: non-null and NUL-terminated per the API contract.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Fail(PinnStatus::InvalidString, format!("{what} is not valid UTF-8")))
}

fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    let slot = non_null_mut(out, "output pointer")?;
    *slot = Box::into_raw(Box::new(value));
    Ok(())
}

fn free<T>(p: *mut T) {
    if !p.is_null() {
        // SAFETY: `p` came from `Box::into_raw` in this library.
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Message for the most recent failure on this thread, or an empty string.
/// The pointer stays valid until the next call into this library.
#[no_mangle]
pub extern "C" fn pinn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pinn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse config text. Relative paths in it resolve against `base_dir`
/// (may be null for the current directory).
///
/// # Safety
/// `text` and `base_dir` must be null or NUL-terminated strings; `out` must
/// be null or writable.
#[no_mangle]
pub unsafe extern "C" fn pinn_config_parse(text: *const c_char, base_dir: *const c_char, out: *mut *mut PinnConfig) -> PinnStatus {
    guard(|| {
        let text = string_arg(text, "text")?;
        let base = if base_dir.is_null() {
            PathBuf::from(".")
        } else {
            PathBuf::from(string_arg(base_dir, "base_dir")?)
        };
        let cfg = parse_config(text, &base)?;
        write_out(out, PinnConfig(cfg))
    })
}

/// Load a config file.
///
/// # Safety
/// `path` must be null or a NUL-terminated string; `out` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn pinn_config_load(path: *const c_char, out: *mut *mut PinnConfig) -> PinnStatus {
    guard(|| {
        let cfg = ExperimentConfig::load(Path::new(string_arg(path, "path")?))?;
        write_out(out, PinnConfig(cfg))
    })
}

/// Override trial count, epoch count and base seed. Zero trials or epochs
/// leave the current value.
///
/// # Safety
/// `cfg` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pinn_config_override(cfg: *mut PinnConfig, trials: usize, epochs: u64, seed: u64) -> PinnStatus {
    guard(|| {
        let cfg = &mut non_null_mut(cfg, "config")?.0;
        if trials > 0 {
            cfg.trials = trials;
        }
        if epochs > 0 {
            cfg.epochs = epochs;
        }
        cfg.seed = seed;
        cfg.validate()?;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pinn_config_free(cfg: *mut PinnConfig) {
    free(cfg);
}

/// Train every trial of `cfg` on up to `jobs` threads (0 = all cores).
///
/// # Safety
/// `cfg` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn pinn_run(cfg: *const PinnConfig, jobs: usize, out: *mut *mut PinnResult) -> PinnStatus {
    guard(|| {
        let cfg = &non_null(cfg, "config")?.0;
        let jobs = if jobs == 0 { harness::default_jobs() } else { jobs };
        let result = harness::run_experiment(&Benchmark::prepare(cfg)?, jobs)?;
        write_out(out, PinnResult(result))
    })
}

/// # Safety
/// `res` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn pinn_result_summary(res: *const PinnResult, out: *mut PinnSummary) -> PinnStatus {
    guard(|| {
        let row = non_null(res, "result")?.0.summary();
        let slot = non_null_mut(out, "output pointer")?;
        *slot = PinnSummary {
            trials: row.trials,
            diverged: row.diverged,
            has_stats: row.mean.is_some() as i32,
            mean: row.mean.unwrap_or(f64::NAN),
            std: row.std.unwrap_or(f64::NAN),
            median: row.median.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// Final test MSE of one trial. Fails with `Domain` if the trial diverged or
/// the problem has no reference solution.
///
/// # Safety
/// `res` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn pinn_result_final_test_mse(res: *const PinnResult, trial: usize, out: *mut f64) -> PinnStatus {
    guard(|| {
        let outcome = non_null(res, "result")?
            .0
            .outcomes
            .get(trial)
            .ok_or_else(|| Fail(PinnStatus::OutOfRange, format!("no trial {trial}")))?;
        let v = outcome.final_test_mse.ok_or_else(|| {
            let why = outcome.diverged.as_deref().unwrap_or("no reference solution");
            Fail(PinnStatus::Domain, format!("trial {trial} has no test MSE: {why}"))
        })?;
        *non_null_mut(out, "output pointer")? = v;
        Ok(())
    })
}

/// Write records.csv, curve.csv, curve.svg, summary.csv and parameters
/// into `dir`.
///
/// # Safety
/// `res` must be null or a live handle; `dir` must be null or a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pinn_result_write(res: *const PinnResult, dir: *const c_char) -> PinnStatus {
    guard(|| {
        let res = &non_null(res, "result")?.0;
        harness::emit_plot_data(res, Path::new(string_arg(dir, "dir")?))?;
        Ok(())
    })
}

/// Copy out the trained parameters of one trial.
///
/// # Safety
/// `res` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn pinn_result_params(res: *const PinnResult, trial: usize, out: *mut *mut PinnParams) -> PinnStatus {
    guard(|| {
        let outcome = non_null(res, "result")?
            .0
            .outcomes
            .get(trial)
            .ok_or_else(|| Fail(PinnStatus::OutOfRange, format!("no trial {trial}")))?;
        write_out(out, PinnParams(outcome.params.clone()))
    })
}

/// # Safety
/// `res` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pinn_result_free(res: *mut PinnResult) {
    free(res);
}

/// Load parameters saved by the trainer.
///
/// # Safety
/// `path` must be null or a NUL-terminated string; `out` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn pinn_params_load(path: *const c_char, out: *mut *mut PinnParams) -> PinnStatus {
    guard(|| {
        let p = ParamSet::load(Path::new(string_arg(path, "path")?))?;
        write_out(out, PinnParams(p))
    })
}

/// # Safety
/// `params` must be null or a live handle; `path` must be null or a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pinn_params_save(params: *const PinnParams, path: *const c_char) -> PinnStatus {
    guard(|| {
        non_null(params, "params")?.0.save(Path::new(string_arg(path, "path")?))?;
        Ok(())
    })
}

/// Input and output widths of the network.
///
/// # Safety
/// `params` must be null or a live handle; the out-pointers must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn pinn_params_dims(params: *const PinnParams, inputs: *mut usize, outputs: *mut usize) -> PinnStatus {
    guard(|| {
        let w = non_null(params, "params")?.0.widths();
        *non_null_mut(inputs, "inputs")? = w[0];
        *non_null_mut(outputs, "outputs")? = w[w.len() - 1];
        Ok(())
    })
}

/// Evaluate the network at one point: `x` has `n_in` values, `y` room for
/// `n_out`.
///
/// # Safety
/// `params` must be null or a live handle; `x` must point to `n_in`
/// readable doubles and `y` to `n_out` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pinn_params_eval(
    params: *const PinnParams,
    x: *const f64,
    n_in: usize,
    y: *mut f64,
    n_out: usize,
) -> PinnStatus {
    guard(|| {
        let p = &non_null(params, "params")?.0;
        if x.is_null() || y.is_null() {
            return Err(Fail(PinnStatus::NullPointer, "input or output buffer is null".into()));
        }
        // SAFETY: the caller provides `n_in` readable doubles.
        let xs = unsafe { std::slice::from_raw_parts(x, n_in) };
        let values = network::forward(p, xs)?;
        if values.len() != n_out {
            return Err(Fail(
                PinnStatus::Usage,
                format!("network has {} outputs, buffer holds {n_out}", values.len()),
            ));
        }
        // SAFETY: the caller provides `n_out` writable doubles.
        unsafe { ptr::copy_nonoverlapping(values.as_ptr(), y, n_out) };
        Ok(())
    })
}

/// # Safety
/// `params` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pinn_params_free(params: *mut PinnParams) {
    free(params);
}
