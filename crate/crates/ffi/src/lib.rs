//! C interface. Every object is an opaque heap handle released with its `_free`
//! function; every fallible call returns an [`RgmStatus`] and, on failure, leaves
//! a message retrievable through [`rgm_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use rgm::datasets::{generate_synthetic, Dataset, Scenario};
use rgm::diagnostics::log_cpo;
use rgm::{run_chain, Error, ModelConfig, Trace};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RgmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    IoError = 4,
    RuntimeError = 5,
    Panic = 6,
}

pub struct RgmConfig(ModelConfig);

pub struct RgmDataset(Dataset);

pub struct RgmTrace(Trace);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &Error) -> RgmStatus {
    match e {
        Error::InvalidParameter { .. }
        | Error::DimensionMismatch { .. }
        | Error::EmptyDataset
        | Error::NonPositiveVariance { .. }
        | Error::TruncationInsufficient { .. } => RgmStatus::InvalidArgument,
        Error::Parse { .. } | Error::Json(_) | Error::Csv(_) => RgmStatus::ParseError,
        Error::Io(_) => RgmStatus::IoError,
        _ => RgmStatus::RuntimeError,
    }
}

struct Fail(RgmStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(RgmStatus::NullPointer, format!("`{what}` is null"))
}

/// Runs `f`, converting errors and panics into a status and clearing the
/// thread's error message on success.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> RgmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RgmStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            RgmStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(RgmStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer stays
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn rgm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn rgm_config_default(out: *mut *mut RgmConfig) -> RgmStatus {
    guard(|| put(out, RgmConfig(ModelConfig::default())))
}

/// Set one configuration key from its text form, as in a configuration file.
///
/// # Safety
/// `config` must come from [`rgm_config_default`]; `key` and `value` must be
/// null-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn rgm_config_set(
    config: *mut RgmConfig,
    key: *const c_char,
    value: *const c_char,
) -> RgmStatus {
    guard(|| {
        let cfg = config.as_mut().ok_or_else(|| null("config"))?;
        let (key, value) = (str_arg(key, "key")?, str_arg(value, "value")?);
        cfg.0.set(key, value)?;
        Ok(())
    })
}

/// # Safety
/// `config` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rgm_config_free(config: *mut RgmConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Dataset of `n` observations in dimension `p`, copied from row-major `obs`.
///
/// # Safety
/// `obs` must point to `n * p` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn rgm_dataset_new(
    obs: *const f64,
    n: usize,
    p: usize,
    out: *mut *mut RgmDataset,
) -> RgmStatus {
    guard(|| {
        if obs.is_null() {
            return Err(null("obs"));
        }
        let len = n
            .checked_mul(p)
            .ok_or_else(|| Fail(RgmStatus::InvalidArgument, "n * p overflows".into()))?;
        let values = std::slice::from_raw_parts(obs, len).to_vec();
        put(out, RgmDataset(Dataset::new("ffi", p, values, None)?))
    })
}

/// Synthetic dataset; `scenario` is one of `trimodal`, `emg`, `ten-d`, `thirteen`.
///
/// # Safety
/// `scenario` must be a null-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rgm_dataset_simulate(
    scenario: *const c_char,
    n: usize,
    seed: u64,
    out: *mut *mut RgmDataset,
) -> RgmStatus {
    guard(|| {
        let s: Scenario = str_arg(scenario, "scenario")?.parse()?;
        put(out, RgmDataset(generate_synthetic(s, n, seed)?))
    })
}

/// Number of observations, or 0 for a null handle.
///
/// # Safety
/// `data` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rgm_dataset_n(data: *const RgmDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.n())
}

/// Dimension, or 0 for a null handle.
///
/// # Safety
/// `data` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rgm_dataset_p(data: *const RgmDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.p())
}

/// # Safety
/// `data` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rgm_dataset_free(data: *mut RgmDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Run one chain. Sweeps after `burn_in` are retained every `thin` sweeps.
///
/// # Safety
/// `data` and `config` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rgm_run_chain(
    data: *const RgmDataset,
    config: *const RgmConfig,
    sweeps: usize,
    burn_in: usize,
    thin: usize,
    seed: u64,
    out: *mut *mut RgmTrace,
) -> RgmStatus {
    guard(|| {
        let data = handle(data, "data")?;
        let cfg = handle(config, "config")?;
        cfg.0.validate()?;
        let trace = run_chain(&data.0, &cfg.0, sweeps, burn_in, thin, seed)?;
        put(out, RgmTrace(trace))
    })
}

/// Retained sweeps, or 0 for a null handle.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rgm_trace_len(trace: *const RgmTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.len())
}

unsafe fn snapshot<'a>(trace: *const RgmTrace, index: usize) -> Result<&'a rgm::Snapshot, Fail> {
    let t = handle(trace, "trace")?;
    t.0.snapshots.get(index).ok_or_else(|| {
        Fail(
            RgmStatus::InvalidArgument,
            format!("index {index} out of range for {} snapshots", t.0.len()),
        )
    })
}

/// Number of components `K` in retained sweep `index`.
///
/// # Safety
/// `trace` must be a live handle and `out_k` writable.
#[no_mangle]
pub unsafe extern "C" fn rgm_trace_k(
    trace: *const RgmTrace,
    index: usize,
    out_k: *mut usize,
) -> RgmStatus {
    guard(|| {
        let s = snapshot(trace, index)?;
        *out_k.as_mut().ok_or_else(|| null("out_k"))? = s.k;
        Ok(())
    })
}

/// Copy the cluster labels of retained sweep `index` into `buf`, whose length
/// `len` must equal the number of observations.
///
/// # Safety
/// `trace` must be a live handle and `buf` must hold `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn rgm_trace_assignments(
    trace: *const RgmTrace,
    index: usize,
    buf: *mut usize,
    len: usize,
) -> RgmStatus {
    guard(|| {
        let s = snapshot(trace, index)?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len != s.assignments.len() {
            return Err(Error::DimensionMismatch {
                expected: s.assignments.len(),
                found: len,
            }
            .into());
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(&s.assignments);
        Ok(())
    })
}

/// Log conditional predictive ordinate summed over observations.
///
/// # Safety
/// `trace` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rgm_trace_log_cpo(trace: *const RgmTrace, out: *mut f64) -> RgmStatus {
    guard(|| {
        let v = log_cpo(&handle(trace, "trace")?.0)?;
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}

/// Write the trace as JSON lines to `path`.
///
/// # Safety
/// `trace` must be a live handle and `path` a null-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rgm_trace_write(trace: *const RgmTrace, path: *const c_char) -> RgmStatus {
    guard(|| {
        let t = handle(trace, "trace")?;
        t.0.save(Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `trace` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rgm_trace_free(trace: *mut RgmTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn last_error() -> Option<String> {
        let p = rgm_last_error_message();
        (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
    }

    #[test]
    fn errors_set_and_clear_the_message() {
        let mut cfg = ptr::null_mut();
        unsafe {
            assert_eq!(rgm_config_default(&mut cfg), RgmStatus::Ok);
            let st = rgm_config_set(cfg, c"beta".as_ptr(), c"abc".as_ptr());
            assert_eq!(st, RgmStatus::InvalidArgument);
            assert!(last_error().unwrap().contains("beta"));
            assert_eq!(
                rgm_config_set(cfg, c"beta".as_ptr(), c"0.5".as_ptr()),
                RgmStatus::Ok
            );
            assert!(last_error().is_none());
            assert_eq!((*cfg).0.beta, 0.5);
            rgm_config_free(cfg);
        }
    }

    #[test]
    fn null_handles_are_reported() {
        unsafe {
            assert_eq!(rgm_config_default(ptr::null_mut()), RgmStatus::NullPointer);
            assert_eq!(rgm_dataset_n(ptr::null()), 0);
            let mut k = 0;
            assert_eq!(rgm_trace_k(ptr::null(), 0, &mut k), RgmStatus::NullPointer);
            rgm_trace_free(ptr::null_mut());
        }
    }

    #[test]
    fn panics_become_a_status() {
        let st = guard(|| panic!("boom"));
        assert_eq!(st, RgmStatus::Panic);
        assert_eq!(last_error().unwrap(), "panic: boom");
    }
}
