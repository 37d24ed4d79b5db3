//! C interface to `freetci`.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns a
//! [`FreetciStatus`]; on failure the message is available from
//! [`freetci_last_error`] on the same thread until the next failing call.
//! Structured results are returned as NUL-terminated JSON strings owned by
//! the caller and released with [`freetci_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use freetci::equilibrium::solve_equilibrium;
use freetci::measures::GridMeasure;
use freetci::potentials::Potential;
use freetci::pressure::{pressure_estimate, PressureSettings};
use freetci::tci::{free_tci_suite, verify_free_tci_circle, verify_free_tci_line, Family};
use freetci::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreetciStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Numerical = 3,
    Io = 4,
    Panic = 5,
}

/// Opaque potential handle.
pub struct FreetciPotential(Potential);

/// Opaque grid-measure handle.
pub struct FreetciMeasure(GridMeasure);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> FreetciStatus {
    match e {
        Error::Io(_) => FreetciStatus::Io,
        e if e.is_numerical() => FreetciStatus::Numerical,
        _ => FreetciStatus::InvalidInput,
    }
}

/// Runs `f`, turning errors and panics into a status code.
fn guard<F: FnOnce() -> Result<(), FfiError>>(f: F) -> FreetciStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FreetciStatus::Ok,
        Ok(Err(FfiError(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            FreetciStatus::Panic
        }
    }
}

struct FfiError(FreetciStatus, String);

impl From<Error> for FfiError {
    fn from(e: Error) -> Self {
        FfiError(status_of(&e), e.to_string())
    }
}

impl From<serde_json::Error> for FfiError {
    fn from(e: serde_json::Error) -> Self {
        FfiError(FreetciStatus::Numerical, format!("serialisation: {e}"))
    }
}

fn null(what: &str) -> FfiError {
    FfiError(FreetciStatus::NullPointer, format!("{what} is null"))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, FfiError> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn as_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, FfiError> {
    if p.is_null() {
        return Err(null(what));
    }
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| FfiError(FreetciStatus::InvalidInput, format!("{what} is not UTF-8")))
}

unsafe fn write_json<T: serde::Serialize>(out: *mut *mut c_char, value: &T) -> Result<(), FfiError> {
    if out.is_null() {
        return Err(null("out"));
    }
    let text = serde_json::to_string(value)?;
    let c = CString::new(text).map_err(|e| FfiError(FreetciStatus::Numerical, e.to_string()))?;
    unsafe { *out = c.into_raw() };
    Ok(())
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn freetci_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn freetci_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn freetci_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Parses a potential such as `quadratic`, `line:0,0,1,0,0.25@2` or
/// `circle:0|0.5|@0`.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn freetci_potential_parse(
    spec: *const c_char,
    out: *mut *mut FreetciPotential,
) -> FreetciStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let q: Potential = unsafe { as_str(spec, "spec") }?.parse()?;
        unsafe { *out = Box::into_raw(Box::new(FreetciPotential(q))) };
        Ok(())
    })
}

/// Convexity modulus carried by the potential.
///
/// # Safety
/// `q` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn freetci_potential_rho(q: *const FreetciPotential, out: *mut f64) -> FreetciStatus {
    guard(|| {
        let q = unsafe { as_ref(q, "potential") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        unsafe { *out = q.0.rho };
        Ok(())
    })
}

/// # Safety
/// `q` must come from [`freetci_potential_parse`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn freetci_potential_free(q: *mut FreetciPotential) {
    if !q.is_null() {
        drop(unsafe { Box::from_raw(q) });
    }
}

/// Equilibrium measure of `q` on `cells` cells of `[-radius, radius]` (the
/// radius is ignored for circle potentials).
///
/// # Safety
/// `q` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn freetci_equilibrium(
    q: *const FreetciPotential,
    radius: f64,
    cells: usize,
    out: *mut *mut FreetciMeasure,
) -> FreetciStatus {
    guard(|| {
        let q = unsafe { as_ref(q, "potential") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mu = solve_equilibrium(&q.0, radius, cells)?;
        unsafe { *out = Box::into_raw(Box::new(FreetciMeasure(mu))) };
        Ok(())
    })
}

/// Builds a measure from `len` non-negative weights (normalised here) on
/// the grid [`freetci_equilibrium`] uses for that carrier and cell count.
///
/// # Safety
/// `weights` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn freetci_measure_from_weights(
    circle: bool,
    radius: f64,
    weights: *const f64,
    len: usize,
    out: *mut *mut FreetciMeasure,
) -> FreetciStatus {
    use freetci::measures::{circle_grid, interval_grid, Carrier};
    guard(|| {
        if weights.is_null() {
            return Err(null("weights"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let raw = unsafe { std::slice::from_raw_parts(weights, len) }.to_vec();
        let (carrier, nodes) = if circle {
            (Carrier::Circle, circle_grid(len))
        } else {
            (Carrier::Interval { radius }, interval_grid(radius, len))
        };
        let mu = GridMeasure::from_unnormalized(carrier, nodes, raw)?;
        unsafe { *out = Box::into_raw(Box::new(FreetciMeasure(mu))) };
        Ok(())
    })
}

/// Number of cells.
///
/// # Safety
/// `mu` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn freetci_measure_len(mu: *const FreetciMeasure) -> usize {
    unsafe { mu.as_ref() }.map_or(0, |m| m.0.len())
}

/// Copies nodes and weights into caller buffers of `len` doubles each;
/// either buffer may be null.
///
/// # Safety
/// Non-null buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn freetci_measure_copy(
    mu: *const FreetciMeasure,
    nodes: *mut f64,
    weights: *mut f64,
    len: usize,
) -> FreetciStatus {
    guard(|| {
        let mu = unsafe { as_ref(mu, "measure") }?;
        if len != mu.0.len() {
            return Err(FfiError(
                FreetciStatus::InvalidInput,
                format!("buffer length {len}, measure has {} cells", mu.0.len()),
            ));
        }
        if !nodes.is_null() {
            unsafe { std::slice::from_raw_parts_mut(nodes, len) }.copy_from_slice(mu.0.nodes());
        }
        if !weights.is_null() {
            unsafe { std::slice::from_raw_parts_mut(weights, len) }.copy_from_slice(mu.0.weights());
        }
        Ok(())
    })
}

/// Logarithmic energy `Sigma(mu)`.
///
/// # Safety
/// `mu` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn freetci_measure_log_energy(mu: *const FreetciMeasure, out: *mut f64) -> FreetciStatus {
    guard(|| {
        let mu = unsafe { as_ref(mu, "measure") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        unsafe { *out = mu.0.log_energy().value };
        Ok(())
    })
}

/// # Safety
/// `mu` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn freetci_measure_free(mu: *mut FreetciMeasure) {
    if !mu.is_null() {
        drop(unsafe { Box::from_raw(mu) });
    }
}

/// Free transportation-cost check of `mu` against the equilibrium measure
/// of `q`; writes the report as JSON. A negative `rho` on the line (or
/// `rho <= -1/2` on the circle) is rejected.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn freetci_tci_check(
    mu: *const FreetciMeasure,
    q: *const FreetciPotential,
    rho: f64,
    out: *mut *mut c_char,
) -> FreetciStatus {
    guard(|| {
        let mu = unsafe { as_ref(mu, "measure") }?;
        let q = unsafe { as_ref(q, "potential") }?;
        let report = if q.0.is_circle() {
            verify_free_tci_circle(&mu.0, &q.0, rho)?
        } else {
            verify_free_tci_line(&mu.0, &q.0, rho)?
        };
        unsafe { write_json(out, &report) }
    })
}

/// Runs a named test family (`shifted-semicircle`, `scaled-semicircle`,
/// `uniform`, `arcsine`, `line`, `trigonometric`) and writes the JSON
/// array of reports.
///
/// # Safety
/// `family` must be a NUL-terminated string, `q` a live handle and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn freetci_tci_suite(
    family: *const c_char,
    q: *const FreetciPotential,
    rho: f64,
    out: *mut *mut c_char,
) -> FreetciStatus {
    guard(|| {
        let name = unsafe { as_str(family, "family") }?;
        let family: Family = serde_json::from_value(serde_json::Value::String(name.into()))
            .map_err(|_| FfiError(FreetciStatus::InvalidInput, format!("unknown family {name:?}")))?;
        let q = unsafe { as_ref(q, "potential") }?;
        let reports = free_tci_suite(family, &q.0, rho)?;
        unsafe { write_json(out, &reports) }
    })
}

/// Truncated pressure of the single-letter potential `h` at each of the
/// `count` sizes in `dims`, with the large-N extrapolation, as JSON.
///
/// # Safety
/// `dims` must point to `count` sizes, `h` be a live handle and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn freetci_pressure(
    h: *const FreetciPotential,
    dims: *const usize,
    count: usize,
    radius: f64,
    seed: u64,
    out: *mut *mut c_char,
) -> FreetciStatus {
    guard(|| {
        let h = unsafe { as_ref(h, "potential") }?;
        if dims.is_null() {
            return Err(null("dims"));
        }
        let dims = unsafe { std::slice::from_raw_parts(dims, count) };
        let settings = PressureSettings { seed, ..PressureSettings::default() };
        let report = pressure_estimate(std::slice::from_ref(&h.0), dims, radius, &settings)?;
        unsafe { write_json(out, &report) }
    })
}
