//! C interface for the censadd library.
//!
//! The interface follows the usual opaque-handle pattern: construct a sample
//! from flat arrays, run a fit configured by the same JSON schema the CLI
//! accepts, then copy band columns out. Every call returns a status code;
//! on failure a thread-local message is retrievable through
//! [`censadd_last_error_message`].
//!
//! The generated header lives at `include/censadd.h`.

use censadd::cli::{fit_bands, FitReport};
use censadd::config::FitFileConfig;
use censadd::survival::CensoredSample;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CensaddStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Invalid input: malformed configuration, bad data, or a dimension
    /// mismatch.
    InvalidArgument = 2,
    /// A numerical failure inside the fit.
    Numerical = 3,
    /// An internal panic was caught at the boundary.
    Panic = 4,
}

/// Band column selector for [`censadd_fit_band`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CensaddBandColumn {
    /// Grid abscissae.
    Grid = 0,
    /// Estimated additive component.
    Eta = 1,
    /// Plug-in standard deviation.
    Sigma = 2,
    /// Lower confidence bound.
    CiLo = 3,
    /// Upper confidence bound.
    CiHi = 4,
}

/// Opaque censored sample handle.
pub struct CensaddSample {
    inner: CensoredSample,
}

/// Opaque fit handle: per-axis bands plus the fit report.
pub struct CensaddFit {
    fit: censadd::additive::AdditiveFit,
    report: FitReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let cstring = CString::new(message.replace('\0', " "))
        .unwrap_or_else(|_| CString::new("invalid error message").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstring));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn status_of(err: &censadd::Error) -> CensaddStatus {
    match err.exit_code() {
        2 => CensaddStatus::Numerical,
        _ => CensaddStatus::InvalidArgument,
    }
}

fn guard<F: FnOnce() -> CensaddStatus>(f: F) -> CensaddStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic".into());
            CensaddStatus::Panic
        }
    }
}

/// Returns the most recent error message on this thread as a heap-allocated
/// string, or null when no error is recorded. Free it with
/// [`censadd_string_free`].
#[no_mangle]
pub extern "C" fn censadd_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(msg) => msg.clone().into_raw(),
        None => std::ptr::null_mut(),
    })
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `ptr` must be null or a string previously returned by this library, and
/// must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn censadd_string_free(ptr: *mut c_char) {
    if !ptr.is_null() {
        drop(CString::from_raw(ptr));
    }
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn censadd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Builds a censored sample from flat arrays.
///
/// `z` and `delta` have length `n`; `x` is row-major with `n` rows of `d`
/// covariates. On success writes a handle to `out`; free it with
/// [`censadd_sample_free`].
///
/// # Safety
/// `z` and `delta` must point to `n` readable elements, `x` to `n * d`
/// readable elements, and `out` to a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn censadd_sample_new(
    z: *const f64,
    delta: *const u8,
    x: *const f64,
    n: usize,
    d: usize,
    out: *mut *mut CensaddSample,
) -> CensaddStatus {
    guard(|| {
        clear_error();
        if z.is_null() || delta.is_null() || x.is_null() || out.is_null() {
            set_error("null pointer argument".into());
            return CensaddStatus::NullPointer;
        }
        let z = std::slice::from_raw_parts(z, n).to_vec();
        let delta = std::slice::from_raw_parts(delta, n).to_vec();
        let flat = std::slice::from_raw_parts(x, n * d);
        let mut cols = vec![Vec::with_capacity(n); d];
        for row in 0..n {
            for (axis, col) in cols.iter_mut().enumerate() {
                col.push(flat[row * d + axis]);
            }
        }
        match CensoredSample::from_columns(z, delta, cols) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(CensaddSample { inner }));
                CensaddStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Frees a sample handle. Null is ignored.
///
/// # Safety
/// `sample` must be null or a handle from [`censadd_sample_new`], and must
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn censadd_sample_free(sample: *mut CensaddSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Number of observations in the sample.
///
/// # Safety
/// `sample` must be null or a live handle from [`censadd_sample_new`].
#[no_mangle]
pub unsafe extern "C" fn censadd_sample_n(sample: *const CensaddSample) -> usize {
    if sample.is_null() {
        return 0;
    }
    (*sample).inner.n()
}

/// Covariate dimension of the sample.
///
/// # Safety
/// `sample` must be null or a live handle from [`censadd_sample_new`].
#[no_mangle]
pub unsafe extern "C" fn censadd_sample_dim(sample: *const CensaddSample) -> usize {
    if sample.is_null() {
        return 0;
    }
    (*sample).inner.dim()
}

/// Runs the full fit pipeline on a sample.
///
/// `config_json` uses the same schema as the CLI fit configuration. On
/// success writes a fit handle to `out`; free it with [`censadd_fit_free`].
///
/// # Safety
/// `sample` must be a live handle, `config_json` a NUL-terminated string,
/// and `out` a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn censadd_fit_run(
    sample: *const CensaddSample,
    config_json: *const c_char,
    out: *mut *mut CensaddFit,
) -> CensaddStatus {
    guard(|| {
        clear_error();
        if sample.is_null() || config_json.is_null() || out.is_null() {
            set_error("null pointer argument".into());
            return CensaddStatus::NullPointer;
        }
        let config_text = match CStr::from_ptr(config_json).to_str() {
            Ok(s) => s,
            Err(_) => {
                set_error("configuration is not valid UTF-8".into());
                return CensaddStatus::InvalidArgument;
            }
        };
        let cfg: FitFileConfig = match serde_json::from_str(config_text) {
            Ok(cfg) => cfg,
            Err(e) => {
                set_error(format!("config: {e}"));
                return CensaddStatus::InvalidArgument;
            }
        };
        match fit_bands(&(*sample).inner, &cfg) {
            Ok((fit, report)) => {
                *out = Box::into_raw(Box::new(CensaddFit { fit, report }));
                CensaddStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Frees a fit handle. Null is ignored.
///
/// # Safety
/// `fit` must be null or a handle from [`censadd_fit_run`], and must not be
/// used afterwards.
#[no_mangle]
pub unsafe extern "C" fn censadd_fit_free(fit: *mut CensaddFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Number of fitted additive components (the covariate dimension).
///
/// # Safety
/// `fit` must be null or a live handle from [`censadd_fit_run`].
#[no_mangle]
pub unsafe extern "C" fn censadd_fit_dim(fit: *const CensaddFit) -> usize {
    if fit.is_null() {
        return 0;
    }
    (*fit).fit.components.len()
}

/// Constant term of the additive predictor.
///
/// # Safety
/// `fit` must be null or a live handle from [`censadd_fit_run`].
#[no_mangle]
pub unsafe extern "C" fn censadd_fit_constant(fit: *const CensaddFit) -> f64 {
    if fit.is_null() {
        return f64::NAN;
    }
    (*fit).fit.constant
}

/// Grid length of one component; zero for an out-of-range axis.
///
/// # Safety
/// `fit` must be null or a live handle from [`censadd_fit_run`].
#[no_mangle]
pub unsafe extern "C" fn censadd_fit_grid_len(fit: *const CensaddFit, axis: usize) -> usize {
    if fit.is_null() {
        return 0;
    }
    let fit = &*fit;
    fit.fit.components.get(axis).map_or(0, |c| c.grid.len())
}

/// Copies one band column of one component into `out`, which must hold
/// `len >= censadd_fit_grid_len(fit, axis)` doubles.
///
/// # Safety
/// `fit` must be a live handle and `out` must point to `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn censadd_fit_band(
    fit: *const CensaddFit,
    axis: usize,
    column: CensaddBandColumn,
    out: *mut f64,
    len: usize,
) -> CensaddStatus {
    guard(|| {
        clear_error();
        if fit.is_null() || out.is_null() {
            set_error("null pointer argument".into());
            return CensaddStatus::NullPointer;
        }
        let fit = &*fit;
        let comp = match fit.fit.components.get(axis) {
            Some(c) => c,
            None => {
                set_error(format!("axis {axis} out of range"));
                return CensaddStatus::InvalidArgument;
            }
        };
        let source: &[f64] = match column {
            CensaddBandColumn::Grid => &comp.grid,
            CensaddBandColumn::Eta => &comp.eta,
            CensaddBandColumn::Sigma => match &comp.sigma {
                Some(v) => v,
                None => {
                    set_error("no standard deviations on this component".into());
                    return CensaddStatus::InvalidArgument;
                }
            },
            CensaddBandColumn::CiLo => match &comp.ci_lo {
                Some(v) => v,
                None => {
                    set_error("no interval bounds on this component".into());
                    return CensaddStatus::InvalidArgument;
                }
            },
            CensaddBandColumn::CiHi => match &comp.ci_hi {
                Some(v) => v,
                None => {
                    set_error("no interval bounds on this component".into());
                    return CensaddStatus::InvalidArgument;
                }
            },
        };
        if len < source.len() {
            set_error(format!(
                "output buffer holds {len} values, component needs {}",
                source.len()
            ));
            return CensaddStatus::InvalidArgument;
        }
        std::ptr::copy_nonoverlapping(source.as_ptr(), out, source.len());
        CensaddStatus::Ok
    })
}

/// Serializes the fit report (bandwidths, diagnostics, warnings, censoring
/// survival) as JSON. Free the string with [`censadd_string_free`].
///
/// # Safety
/// `fit` must be null or a live handle from [`censadd_fit_run`].
#[no_mangle]
pub unsafe extern "C" fn censadd_fit_report_json(fit: *const CensaddFit) -> *mut c_char {
    if fit.is_null() {
        return std::ptr::null_mut();
    }
    match serde_json::to_string(&(*fit).report) {
        Ok(json) => CString::new(json)
            .map(CString::into_raw)
            .unwrap_or(std::ptr::null_mut()),
        Err(_) => std::ptr::null_mut(),
    }
}
