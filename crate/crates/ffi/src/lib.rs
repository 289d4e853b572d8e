//! C interface to markovcat.
//!
//! Models are opaque handles created from JSON text. Every call returns a
//! [`McStatus`]; on failure [`mc_last_error`] describes the problem. Reports
//! come back as JSON strings that must be released with [`mc_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use markovcat::cli::commands::{self, VerifyRequest};
use markovcat::cli::schema::{self, Input, Model};
use markovcat::cli::{json, Method, Outcome, Suite};
use markovcat::Error;

/// Status codes; the nonzero values match the command-line exit codes where they overlap.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McStatus {
    Ok = 0,
    /// A null pointer or a string that is not UTF-8.
    InvalidArgument = 1,
    /// Parse, validation or domain error in the inputs.
    InvalidInput = 2,
    ResourceCap = 3,
    /// A verification suite ran and failed; the report is still returned.
    SuiteFailed = 4,
    Unsupported = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McMethod {
    ForwardBackward = 0,
    FixedInterval = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McSuite {
    Laws = 0,
    Markov = 1,
    FilterOracle = 2,
    SmootherOracle = 3,
    FilterChain = 4,
}

/// A validated model or joint fixture.
pub struct McModel {
    source: Vec<u8>,
    input: Input,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> McStatus {
    match e {
        Error::Resource { .. } => McStatus::ResourceCap,
        Error::Unsupported(_) => McStatus::Unsupported,
        _ => McStatus::InvalidInput,
    }
}

fn guard(f: impl FnOnce() -> Result<McStatus, (McStatus, String)>) -> McStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            McStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (McStatus, String) {
    (status_of(&e), e.to_string())
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (McStatus, String)> {
    if p.is_null() {
        return Err((McStatus::InvalidArgument, format!("{what} is null")));
    }
    // SAFETY: the caller passes a NUL-terminated string that outlives the call.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| (McStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn model_ref<'a>(p: *const McModel) -> Result<&'a McModel, (McStatus, String)> {
    // SAFETY: the caller passes null or a live handle from `mc_model_from_json`.
    unsafe { p.as_ref() }.ok_or((McStatus::InvalidArgument, "model is null".to_string()))
}

unsafe fn deliver(outcome: Outcome, out: *mut *mut c_char) -> Result<McStatus, (McStatus, String)> {
    let s = CString::new(json::to_string(&outcome.report))
        .map_err(|_| (McStatus::Panic, "report contains NUL".to_string()))?;
    // SAFETY: `out` was checked non-null by the caller of `deliver`.
    unsafe { *out = s.into_raw() };
    if outcome.passed {
        Ok(McStatus::Ok)
    } else {
        set_error("verification failed");
        Ok(McStatus::SuiteFailed)
    }
}

fn check_out<T>(out: *mut *mut T) -> Result<(), (McStatus, String)> {
    if out.is_null() {
        Err((
            McStatus::InvalidArgument,
            "output pointer is null".to_string(),
        ))
    } else {
        // SAFETY: non-null output slot supplied by the caller.
        unsafe { *out = ptr::null_mut() };
        Ok(())
    }
}

/// Parse and validate a model (or joint fixture) from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be a valid pointer.
/// The handle must be released with [`mc_model_free`].
#[no_mangle]
pub unsafe extern "C" fn mc_model_from_json(
    json: *const c_char,
    out: *mut *mut McModel,
) -> McStatus {
    guard(|| {
        check_out(out)?;
        let src = unsafe { text(json, "json") }?;
        let input = schema::parse_input(src).map_err(lib_err)?;
        let handle = Box::new(McModel {
            source: src.as_bytes().to_vec(),
            input,
        });
        unsafe { *out = Box::into_raw(handle) };
        Ok(McStatus::Ok)
    })
}

/// # Safety
/// `model` must be null or a handle from [`mc_model_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mc_model_free(model: *mut McModel) {
    if !model.is_null() {
        // SAFETY: ownership returns to Rust exactly once.
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Horizon `n` of an hmm model (time points `0..=n`); 0 for joint fixtures or null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mc_model_horizon(model: *const McModel) -> usize {
    match unsafe { model.as_ref() }.map(|m| &m.input) {
        Some(Input::Model { model, .. }) => model.horizon(),
        _ => 0,
    }
}

/// Category tag of the model (`"finstoch"`, `"finsetmulti"` or `"gauss"`),
/// a static string; null for joint fixtures or a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mc_model_category(model: *const McModel) -> *const c_char {
    let tag: &'static CStr = match unsafe { model.as_ref() }.map(|m| &m.input) {
        Some(Input::Model { model, .. }) => match model {
            Model::FinStoch(_) => c"finstoch",
            Model::FinSetMulti(_) => c"finsetmulti",
            Model::Gauss(_) => c"gauss",
        },
        _ => return ptr::null(),
    };
    tag.as_ptr()
}

/// Run the filter; writes the JSON report to `*out`.
///
/// # Safety
/// `model` must be a live handle, `observations` a NUL-terminated string,
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mc_filter(
    model: *const McModel,
    observations: *const c_char,
    out: *mut *mut c_char,
) -> McStatus {
    guard(|| {
        check_out(out)?;
        let m = unsafe { model_ref(model) }?;
        let obs = unsafe { text(observations, "observations") }?;
        let outcome = commands::filter(&m.source, obs.as_bytes()).map_err(lib_err)?;
        unsafe { deliver(outcome, out) }
    })
}

/// Smooth a full observation sequence.
///
/// # Safety
/// As [`mc_filter`].
#[no_mangle]
pub unsafe extern "C" fn mc_smooth(
    model: *const McModel,
    observations: *const c_char,
    method: McMethod,
    out: *mut *mut c_char,
) -> McStatus {
    guard(|| {
        check_out(out)?;
        let m = unsafe { model_ref(model) }?;
        let obs = unsafe { text(observations, "observations") }?;
        let method = match method {
            McMethod::ForwardBackward => Method::ForwardBackward,
            McMethod::FixedInterval => Method::FixedInterval,
        };
        let outcome = commands::smooth(&m.source, obs.as_bytes(), method).map_err(lib_err)?;
        unsafe { deliver(outcome, out) }
    })
}

/// Sample `steps` time points (0 for the whole horizon).
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mc_simulate(
    model: *const McModel,
    seed: u64,
    steps: usize,
    out: *mut *mut c_char,
) -> McStatus {
    guard(|| {
        check_out(out)?;
        let m = unsafe { model_ref(model) }?;
        let steps = (steps > 0).then_some(steps);
        let outcome = commands::simulate(&m.source, seed, steps).map_err(lib_err)?;
        unsafe { deliver(outcome, out) }
    })
}

/// Run a verification suite on the model. `observations` may be null.
/// Returns [`McStatus::SuiteFailed`] with the report in `*out` when a check fails.
///
/// # Safety
/// `model` must be a live handle, `observations` null or a NUL-terminated
/// string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mc_verify(
    model: *const McModel,
    suite: McSuite,
    observations: *const c_char,
    seed: u64,
    cases: usize,
    out: *mut *mut c_char,
) -> McStatus {
    guard(|| {
        check_out(out)?;
        let m = unsafe { model_ref(model) }?;
        let obs = if observations.is_null() {
            None
        } else {
            Some(unsafe { text(observations, "observations") }?)
        };
        let suite = match suite {
            McSuite::Laws => Suite::Laws,
            McSuite::Markov => Suite::Markov,
            McSuite::FilterOracle => Suite::FilterOracle,
            McSuite::SmootherOracle => Suite::SmootherOracle,
            McSuite::FilterChain => Suite::FilterChain,
        };
        let req = VerifyRequest {
            suite,
            model: Some(&m.source),
            observations: obs.map(str::as_bytes),
            category: None,
            seed,
            cases,
            tolerance: None,
        };
        let outcome = commands::verify(&req).map_err(lib_err)?;
        unsafe { deliver(outcome, out) }
    })
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn mc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mc_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: the string was produced by `CString::into_raw`.
        drop(unsafe { CString::from_raw(s) });
    }
}
