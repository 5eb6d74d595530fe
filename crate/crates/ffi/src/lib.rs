//! C interface.  A system is loaded from the JSON configuration format of the
//! `floquet` binary into an opaque [`FloquetSystem`] handle; every call
//! returns a [`FloquetStatus`] and leaves a message for
//! [`floquet_last_error`] on failure.
//!
//! Matrices cross the boundary as two row-major `double` arrays (real and
//! imaginary parts) of `n*n` entries.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::OnceLock;

use floquet::cli::{self, CliError, Problem, SystemConfig};
use floquet::floquet::{classify_stability, FloquetData, StabilityClass};
use floquet::linalg::CMatrix;
use floquet::timescale::DEFAULT_TOL;

/// Opaque handle to a loaded system and its (lazily computed) monodromy.
pub struct FloquetSystem {
    problem: Problem,
    floquet: OnceLock<Result<FloquetData, String>>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FloquetStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The configuration was rejected.
    Config = 3,
    /// The analysis failed numerically.
    Numeric = 4,
    /// An output buffer was too small.
    BufferTooSmall = 5,
    /// A time argument does not belong to the time scale.
    OutOfDomain = 6,
    /// Internal error; no further calls on the handle are meaningful.
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FloquetVerdict {
    ExponentiallyStable = 0,
    Stable = 1,
    UnstablePolynomial = 2,
    UnstableExponential = 3,
}

impl From<StabilityClass> for FloquetVerdict {
    fn from(c: StabilityClass) -> Self {
        match c {
            StabilityClass::ExponentiallyStable => FloquetVerdict::ExponentiallyStable,
            StabilityClass::Stable => FloquetVerdict::Stable,
            StabilityClass::UnstablePolynomial => FloquetVerdict::UnstablePolynomial,
            StabilityClass::UnstableExponential => FloquetVerdict::UnstableExponential,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: FloquetStatus, msg: impl AsRef<str>) -> FloquetStatus {
    set_error(msg.as_ref());
    status
}

fn from_cli(e: CliError) -> FloquetStatus {
    let status = match e {
        CliError::Numeric(_) => FloquetStatus::Numeric,
        CliError::Config(_) | CliError::Io(_) => FloquetStatus::Config,
    };
    fail(status, e.to_string())
}

/// Runs `f`, turning panics into [`FloquetStatus::Panic`].
fn guard(f: impl FnOnce() -> FloquetStatus) -> FloquetStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == FloquetStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(FloquetStatus::Panic, "internal panic"),
    }
}

impl FloquetSystem {
    fn floquet(&self) -> Result<&FloquetData, FloquetStatus> {
        self.floquet
            .get_or_init(|| {
                FloquetData::new(&self.problem.sys, &self.problem.t0, &self.problem.opts).map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| fail(FloquetStatus::Numeric, e))
    }
}

unsafe fn system<'a>(handle: *const FloquetSystem) -> Result<&'a FloquetSystem, FloquetStatus> {
    handle
        .as_ref()
        .ok_or_else(|| fail(FloquetStatus::NullArgument, "null system handle"))
}

unsafe fn write_matrix(m: &CMatrix, re: *mut f64, im: *mut f64, len: usize) -> FloquetStatus {
    let n = m.nrows();
    if re.is_null() || im.is_null() {
        return fail(FloquetStatus::NullArgument, "null output buffer");
    }
    if len < n * n {
        return fail(FloquetStatus::BufferTooSmall, format!("need {} entries, got {len}", n * n));
    }
    let re = std::slice::from_raw_parts_mut(re, n * n);
    let im = std::slice::from_raw_parts_mut(im, n * n);
    for i in 0..n {
        for j in 0..n {
            re[i * n + j] = m[(i, j)].re;
            im[i * n + j] = m[(i, j)].im;
        }
    }
    FloquetStatus::Ok
}

/// Parses a JSON system description and stores a new handle in `*out`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
/// The handle must be released with [`floquet_system_free`].
#[no_mangle]
pub unsafe extern "C" fn floquet_system_from_json(json: *const c_char, out: *mut *mut FloquetSystem) -> FloquetStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return fail(FloquetStatus::NullArgument, "null argument");
        }
        *out = ptr::null_mut();
        let text = match CStr::from_ptr(json).to_str() {
            Ok(s) => s,
            Err(e) => return fail(FloquetStatus::InvalidUtf8, e.to_string()),
        };
        match SystemConfig::from_json(text).and_then(SystemConfig::build) {
            Ok(problem) => {
                *out = Box::into_raw(Box::new(FloquetSystem {
                    problem,
                    floquet: OnceLock::new(),
                }));
                FloquetStatus::Ok
            }
            Err(e) => from_cli(e),
        }
    })
}

/// Releases a handle.  Null is ignored.
///
/// # Safety
/// `handle` must come from [`floquet_system_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn floquet_system_free(handle: *mut FloquetSystem) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Dimension `n` of the system, 0 for a null handle.
///
/// # Safety
/// `handle` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn floquet_system_dimension(handle: *const FloquetSystem) -> usize {
    handle.as_ref().map_or(0, |s| s.problem.sys.dimension())
}

/// Period of the time scale, NaN for a null handle.
///
/// # Safety
/// `handle` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn floquet_system_period(handle: *const FloquetSystem) -> f64 {
    handle.as_ref().map_or(f64::NAN, |s| s.problem.sys.period())
}

/// Monodromy matrix `Φ(t0 + p, t0)`, row-major into `re`/`im` (at least `n*n` each).
///
/// # Safety
/// `re` and `im` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn floquet_monodromy(
    handle: *const FloquetSystem,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> FloquetStatus {
    guard(|| {
        let fd = match system(handle).and_then(|s| s.floquet()) {
            Ok(fd) => fd,
            Err(s) => return s,
        };
        write_matrix(fd.monodromy(), re, im, len)
    })
}

/// Transition matrix `Φ(t, t0)` for any `t`, `t0` of the time scale.
///
/// # Safety
/// `re` and `im` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn floquet_transition(
    handle: *const FloquetSystem,
    t: f64,
    t0: f64,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> FloquetStatus {
    guard(|| {
        let sys = match system(handle) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let p = &sys.problem;
        let ts = p.sys.timescale();
        let (Some(a), Some(b)) = (ts.locate(t, DEFAULT_TOL), ts.locate(t0, DEFAULT_TOL)) else {
            return fail(FloquetStatus::OutOfDomain, format!("t = {t} or t0 = {t0} is not in the time scale"));
        };
        match p.sys.transition(&a, &b, &p.opts) {
            Ok(m) => write_matrix(&m, re, im, len),
            Err(e) => fail(FloquetStatus::Numeric, e.to_string()),
        }
    })
}

/// Floquet multipliers with algebraic multiplicity (`n` values); `*count`
/// receives `n`.
///
/// # Safety
/// `re` and `im` must point to `len` writable doubles, `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn floquet_multipliers(
    handle: *const FloquetSystem,
    re: *mut f64,
    im: *mut f64,
    len: usize,
    count: *mut usize,
) -> FloquetStatus {
    guard(|| {
        let fd = match system(handle).and_then(|s| s.floquet()) {
            Ok(fd) => fd,
            Err(s) => return s,
        };
        if re.is_null() || im.is_null() || count.is_null() {
            return fail(FloquetStatus::NullArgument, "null output pointer");
        }
        let values = fd.spectrum().eigenvalue_multiset();
        *count = values.len();
        if len < values.len() {
            return fail(FloquetStatus::BufferTooSmall, format!("need {} entries, got {len}", values.len()));
        }
        for (k, z) in values.iter().enumerate() {
            *re.add(k) = z.re;
            *im.add(k) = z.im;
        }
        FloquetStatus::Ok
    })
}

/// Stability class from the multipliers, with the configured unit-circle tolerance.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn floquet_verdict(handle: *const FloquetSystem, out: *mut FloquetVerdict) -> FloquetStatus {
    guard(|| {
        let sys = match system(handle) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let fd = match sys.floquet() {
            Ok(fd) => fd,
            Err(s) => return s,
        };
        if out.is_null() {
            return fail(FloquetStatus::NullArgument, "null output pointer");
        }
        *out = classify_stability(fd, sys.problem.tolerances.unit).class.into();
        FloquetStatus::Ok
    })
}

/// The `analyze` report as a JSON string in `*out`, to be released with
/// [`floquet_string_free`].
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn floquet_analyze_json(handle: *const FloquetSystem, out: *mut *mut c_char) -> FloquetStatus {
    guard(|| {
        let sys = match system(handle) {
            Ok(s) => s,
            Err(s) => return s,
        };
        if out.is_null() {
            return fail(FloquetStatus::NullArgument, "null output pointer");
        }
        *out = ptr::null_mut();
        match cli::analyze(&sys.problem, false) {
            Ok(report) => match CString::new(report.stdout) {
                Ok(s) => {
                    *out = s.into_raw();
                    FloquetStatus::Ok
                }
                Err(e) => fail(FloquetStatus::Panic, e.to_string()),
            },
            Err(e) => from_cli(e),
        }
    })
}

/// Releases a string returned by this library.  Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn floquet_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failed call on this thread (empty after a success).
/// Valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn floquet_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Short name of a status code; static storage.
#[no_mangle]
pub extern "C" fn floquet_status_name(status: FloquetStatus) -> *const c_char {
    let s: &'static CStr = match status {
        FloquetStatus::Ok => c"ok",
        FloquetStatus::NullArgument => c"null argument",
        FloquetStatus::InvalidUtf8 => c"invalid utf-8",
        FloquetStatus::Config => c"configuration error",
        FloquetStatus::Numeric => c"numeric failure",
        FloquetStatus::BufferTooSmall => c"buffer too small",
        FloquetStatus::OutOfDomain => c"not in the time scale",
        FloquetStatus::Panic => c"internal error",
    };
    s.as_ptr()
}
