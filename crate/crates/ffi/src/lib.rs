//! C ABI for the `indexpair` library.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free`. Every fallible call returns an [`IpStatus`]; the text of
//! the most recent error on the calling thread is available from
//! [`ip_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use indexpair::dynamics::SystemKind;
use indexpair::homology::entropy_lower_bound;
use indexpair::pipeline::{cmd_run, KPolicy, Mode, RunConfig, RunResult};
use indexpair::Error;

/// Status codes. Zero is success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    /// A rigorous check failed (isolation, pair, acyclicity, certification).
    CheckFailed = 4,
    Panic = 5,
}

/// Run configuration.
pub struct IpConfig {
    inner: RunConfig,
}

/// Result of a finished run.
pub struct IpRun {
    result: RunResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(s));
}

fn status_of(e: &Error) -> IpStatus {
    match e {
        Error::Stage { source, .. } => status_of(source),
        Error::Io(_) => IpStatus::Io,
        Error::Config(_)
        | Error::InvalidInterval(_)
        | Error::InvalidSystem(_)
        | Error::Unsupported(_)
        | Error::InvalidWeight(_)
        | Error::Parse { .. }
        | Error::Json(_) => IpStatus::InvalidArgument,
        _ => IpStatus::CheckFailed,
    }
}

fn guard(f: impl FnOnce() -> IpStatus) -> IpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("panic inside indexpair");
            IpStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, IpStatus> {
    if p.is_null() {
        set_error("null string argument");
        return Err(IpStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("argument is not UTF-8");
        IpStatus::InvalidArgument
    })
}

macro_rules! try_ip {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Message of the last error on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn ip_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ip_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// New configuration for `map` ("standard", "henon" or "horseshoe") with
/// default settings. Returns null on an unknown map.
///
/// # Safety
/// `map` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ip_config_new(map: *const c_char) -> *mut IpConfig {
    let Ok(name) = str_arg(map) else { return ptr::null_mut() };
    let kind: SystemKind = match name.parse() {
        Ok(k) => k,
        Err(e) => {
            set_error(e.to_string());
            return ptr::null_mut();
        }
    };
    let mut inner = match kind {
        SystemKind::HorseshoeModel => RunConfig::horseshoe(6),
        _ => RunConfig { map: kind, ..Default::default() },
    };
    if kind != SystemKind::Standard {
        inner.k_policy = KPolicy::Off;
    }
    Box::into_raw(Box::new(IpConfig { inner }))
}

/// # Safety
/// `cfg` must come from [`ip_config_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ip_config_free(cfg: *mut IpConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Parameter interval as decimal strings, rounded outward.
///
/// # Safety
/// `cfg` must be a live handle; `lo` and `hi` valid C strings.
#[no_mangle]
pub unsafe extern "C" fn ip_config_set_eps(cfg: *mut IpConfig, lo: *const c_char, hi: *const c_char) -> IpStatus {
    let Some(cfg) = cfg.as_mut() else { return IpStatus::NullPointer };
    let (lo, hi) = (try_ip!(str_arg(lo)), try_ip!(str_arg(hi)));
    cfg.inner.eps_lo = lo.to_owned();
    cfg.inner.eps_hi = hi.to_owned();
    IpStatus::Ok
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ip_config_set_depth(cfg: *mut IpConfig, start: u32, end: u32) -> IpStatus {
    let Some(cfg) = cfg.as_mut() else { return IpStatus::NullPointer };
    cfg.inner.d_start = start;
    cfg.inner.d_end = end;
    IpStatus::Ok
}

/// Seeding mode: "homoclinic", "periodic" or "periodic-plus-orbits".
///
/// # Safety
/// `cfg` must be a live handle; `mode` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn ip_config_set_mode(cfg: *mut IpConfig, mode: *const c_char, max_period: usize) -> IpStatus {
    let Some(cfg) = cfg.as_mut() else { return IpStatus::NullPointer };
    let m: Mode = match try_ip!(str_arg(mode)).parse() {
        Ok(m) => m,
        Err(e) => {
            set_error(format!("{e}"));
            return IpStatus::InvalidArgument;
        }
    };
    cfg.inner.mode = m;
    cfg.inner.max_period = max_period;
    IpStatus::Ok
}

/// Output directory for artifacts; null clears it.
///
/// # Safety
/// `cfg` must be a live handle; `dir` null or a valid C string.
#[no_mangle]
pub unsafe extern "C" fn ip_config_set_out(cfg: *mut IpConfig, dir: *const c_char) -> IpStatus {
    let Some(cfg) = cfg.as_mut() else { return IpStatus::NullPointer };
    cfg.inner.out = if dir.is_null() { None } else { Some(PathBuf::from(try_ip!(str_arg(dir)))) };
    IpStatus::Ok
}

/// Runs the pipeline. On `Ok` or `CheckFailed` a run handle is stored in
/// `*out`; a failed check still yields a result describing the failure.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ip_run(cfg: *const IpConfig, out: *mut *mut IpRun) -> IpStatus {
    guard(|| {
        let (Some(cfg), false) = (cfg.as_ref(), out.is_null()) else {
            set_error("null argument");
            return IpStatus::NullPointer;
        };
        *out = ptr::null_mut();
        match cmd_run(&cfg.inner) {
            Ok(run) => {
                let ok = run.result.ok;
                if let Some(f) = &run.result.failure {
                    set_error(f.clone());
                }
                *out = Box::into_raw(Box::new(IpRun { result: run.result }));
                if ok {
                    IpStatus::Ok
                } else {
                    IpStatus::CheckFailed
                }
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    })
}

/// # Safety
/// `run` must come from [`ip_run`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ip_run_free(run: *mut IpRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// True iff every rigorous stage passed.
///
/// # Safety
/// `run` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ip_run_ok(run: *const IpRun) -> bool {
    run.as_ref().is_some_and(|r| r.result.ok)
}

/// Certified entropy lower bound (0 when nothing was certified).
///
/// # Safety
/// `run` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ip_run_entropy(run: *const IpRun) -> f64 {
    run.as_ref().map_or(0.0, |r| r.result.entropy_lb)
}

/// Symbols after pruning.
///
/// # Safety
/// `run` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ip_run_symbols(run: *const IpRun) -> usize {
    run.as_ref().map_or(0, |r| r.result.symbols_after)
}

/// Boxes in `P1` and `P0`.
///
/// # Safety
/// `run` must be a live handle; the out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn ip_run_pair_size(run: *const IpRun, p1: *mut usize, p0: *mut usize) -> IpStatus {
    let Some(r) = run.as_ref() else { return IpStatus::NullPointer };
    if let Some(p) = p1.as_mut() {
        *p = r.result.p1_boxes;
    }
    if let Some(p) = p0.as_mut() {
        *p = r.result.p0_boxes;
    }
    IpStatus::Ok
}

/// Full result as JSON. Free with [`ip_string_free`].
///
/// # Safety
/// `run` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ip_run_json(run: *const IpRun) -> *mut c_char {
    let Some(r) = run.as_ref() else { return ptr::null_mut() };
    match serde_json::to_string(&r.result).map(CString::new) {
        Ok(Ok(s)) => s.into_raw(),
        _ => ptr::null_mut(),
    }
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ip_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Certified lower bound on `log sp(A)` for a row-major `n × n` 0/1 matrix
/// (`a[j*n + i]` is the edge i → j).
///
/// # Safety
/// `a` must point to `n*n` bytes and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ip_entropy_lower_bound(a: *const u8, n: usize, maxpow: usize, out: *mut f64) -> IpStatus {
    guard(|| {
        if (a.is_null() && n > 0) || out.is_null() {
            set_error("null argument");
            return IpStatus::NullPointer;
        }
        let Some(len) = n.checked_mul(n) else {
            set_error("matrix too large");
            return IpStatus::InvalidArgument;
        };
        let flat = if n == 0 { &[][..] } else { std::slice::from_raw_parts(a, len) };
        let m: Vec<Vec<u8>> = flat.chunks(n.max(1)).map(|r| r.iter().map(|&v| u8::from(v != 0)).collect()).collect();
        *out = entropy_lower_bound(&m, maxpow).value;
        IpStatus::Ok
    })
}
