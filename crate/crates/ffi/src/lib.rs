//! C interface to the optimizer.
//!
//! Handles are opaque and owned by the caller; release them with the matching
//! `ft_*_free`. Every fallible call returns an [`FtStatus`] and leaves a message for
//! [`ft_last_error`] on failure. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use finger_topo::campaign::{persist_run, RunRecord};
use finger_topo::config::ConfigFile;
use finger_topo::optimizer::{run, Formulation, RunResult};
use finger_topo::Error;

/// Status codes. Values 3 and 4 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FtStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Runtime = 4,
    OutOfRange = 5,
    Panic = 6,
}

/// Parsed configuration.
pub struct FtConfig {
    file: ConfigFile,
}

/// Outcome of one optimization run.
pub struct FtResult {
    result: RunResult,
}

/// One iteration of the history.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FtHistoryRow {
    pub iter: usize,
    pub phi: f64,
    /// mm
    pub mean_output_disp: f64,
    /// N mm
    pub strain_energy: f64,
    pub volume_fraction: f64,
    pub max_density_change: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: FtStatus, msg: impl Into<String>) -> FtStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> FtStatus {
    let status = if e.is_config() {
        FtStatus::Config
    } else {
        FtStatus::Runtime
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> FtStatus) -> FtStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(FtStatus::Panic, "internal panic"))
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, FtStatus> {
    if s.is_null() {
        return Err(fail(FtStatus::NullArgument, "null string argument"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(FtStatus::InvalidUtf8, "argument is not valid UTF-8"))
}

macro_rules! try_ft {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn ft_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn ft_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Configuration with every key at its default.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ft_config_default(out: *mut *mut FtConfig) -> FtStatus {
    guard(|| {
        if out.is_null() {
            return fail(FtStatus::NullArgument, "null output pointer");
        }
        *out = Box::into_raw(Box::new(FtConfig {
            file: ConfigFile::default(),
        }));
        FtStatus::Ok
    })
}

/// Parse TOML text in the command-line config format.
///
/// # Safety
/// `toml` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ft_config_parse(toml: *const c_char, out: *mut *mut FtConfig) -> FtStatus {
    guard(|| {
        if out.is_null() {
            return fail(FtStatus::NullArgument, "null output pointer");
        }
        let s = try_ft!(text(toml));
        match ConfigFile::parse(s) {
            Ok(file) => {
                *out = Box::into_raw(Box::new(FtConfig { file }));
                FtStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Apply a `key=value` or `section.key=value` override in place.
///
/// # Safety
/// `config` must come from this library; `item` must be a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ft_config_set(config: *mut FtConfig, item: *const c_char) -> FtStatus {
    guard(|| {
        let Some(cfg) = config.as_mut() else {
            return fail(FtStatus::NullArgument, "null config");
        };
        let s = try_ft!(text(item));
        match cfg.file.with_override(s) {
            Ok(file) => {
                cfg.file = file;
                FtStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `config` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ft_config_free(config: *mut FtConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Run one optimization.
///
/// # Safety
/// `config` must come from this library and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ft_optimize(config: *const FtConfig, out: *mut *mut FtResult) -> FtStatus {
    guard(|| {
        let Some(cfg) = config.as_ref() else {
            return fail(FtStatus::NullArgument, "null config");
        };
        if out.is_null() {
            return fail(FtStatus::NullArgument, "null output pointer");
        }
        let rc = match cfg.file.run_config().and_then(|c| c.validate().map(|_| c)) {
            Ok(c) => c,
            Err(e) => return from_error(e),
        };
        match run(&rc) {
            Ok(result) => {
                *out = Box::into_raw(Box::new(FtResult { result }));
                FtStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `result` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ft_result_free(result: *mut FtResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Number of rows in the history (iterations + 1), 0 for null.
///
/// # Safety
/// `result` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ft_result_history_len(result: *const FtResult) -> usize {
    result.as_ref().map_or(0, |r| r.result.history.len())
}

/// 1 if the run met its convergence tolerance, 0 otherwise.
///
/// # Safety
/// `result` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ft_result_converged(result: *const FtResult) -> i32 {
    result.as_ref().map_or(0, |r| r.result.converged as i32)
}

/// Copy history row `index` into `out`.
///
/// # Safety
/// `result` must come from this library and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ft_result_history(result: *const FtResult, index: usize, out: *mut FtHistoryRow) -> FtStatus {
    guard(|| {
        let (Some(r), false) = (result.as_ref(), out.is_null()) else {
            return fail(FtStatus::NullArgument, "null argument");
        };
        let Some(h) = r.result.history.get(index) else {
            return fail(
                FtStatus::OutOfRange,
                format!("row {index} of {}", r.result.history.len()),
            );
        };
        *out = FtHistoryRow {
            iter: h.iter,
            phi: h.phi,
            mean_output_disp: h.mean_output_disp,
            strain_energy: h.strain_energy,
            volume_fraction: h.volume_fraction,
            max_density_change: h.max_density_change,
        };
        FtStatus::Ok
    })
}

/// Number of active elements in the final density field, 0 for null.
///
/// # Safety
/// `result` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ft_result_density_len(result: *const FtResult) -> usize {
    result.as_ref().map_or(0, |r| r.result.final_rho.len())
}

/// Copy the final density field into `out`, which holds `len` doubles. `len` must be
/// at least [`ft_result_density_len`].
///
/// # Safety
/// `result` must come from this library and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ft_result_density(result: *const FtResult, out: *mut f64, len: usize) -> FtStatus {
    guard(|| {
        let (Some(r), false) = (result.as_ref(), out.is_null()) else {
            return fail(FtStatus::NullArgument, "null argument");
        };
        let rho = r.result.final_rho.as_slice();
        if len < rho.len() {
            return fail(FtStatus::OutOfRange, format!("buffer holds {len}, need {}", rho.len()));
        }
        ptr::copy_nonoverlapping(rho.as_ptr(), out, rho.len());
        FtStatus::Ok
    })
}

/// Write the run directory `<dir>/<run_id>/` with the same files as the command line.
///
/// # Safety
/// `result` must come from this library; `dir` and `run_id` must be nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn ft_result_write(result: *const FtResult, dir: *const c_char, run_id: *const c_char) -> FtStatus {
    guard(|| {
        let Some(r) = result.as_ref() else {
            return fail(FtStatus::NullArgument, "null result");
        };
        let dir = try_ft!(text(dir));
        let id = try_ft!(text(run_id));
        if id.is_empty() || id.contains(['/', '\\']) || id.starts_with('.') {
            return fail(FtStatus::Config, format!("run id `{id}` is not a plain name"));
        }
        let config = &r.result.config;
        let sweep_value = match config.formulation {
            Formulation::Passive => config.volume_fraction,
            Formulation::Active => config.input_displacement.unwrap_or(f64::NAN),
        };
        let record = RunRecord {
            run_id: id.to_string(),
            sweep_value,
            result: r.result.clone(),
        };
        if let Err(e) = std::fs::create_dir_all(dir) {
            return fail(FtStatus::Runtime, format!("{dir}: {e}"));
        }
        match persist_run(Path::new(dir), &record) {
            Ok(()) => FtStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}
