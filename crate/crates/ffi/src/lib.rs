//! C interface to the stepwise evaluator.
//!
//! An engine is created with [`stepwise_engine_new`] and released with
//! [`stepwise_engine_free`]. Functions return a [`StepwiseStatus`]; strings
//! handed out by the library are JSON documents that must be released with
//! [`stepwise_string_free`]. After a failure, [`stepwise_last_error`]
//! describes it.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use stepwise::engine::Engine;
use stepwise::feedback::FeedbackScript;
use stepwise::service::{Service, ServiceRequest, ServiceResponse};

/// Use only rules generated from the prelude (plus `+` and beta reduction).
pub const STEPWISE_FLAG_NO_BUILTINS: u32 = 1;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepwiseStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    PreludeError = 4,
    ScriptError = 5,
    ParseError = 6,
    EvaluationError = 7,
    NoStep = 8,
    Internal = 9,
}

/// Opaque engine handle.
pub struct StepwiseEngine {
    service: Service,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: StepwiseStatus, message: impl Into<String>) -> StepwiseStatus {
    set_error(message);
    status
}

/// Reads an optional C string; `Ok(None)` for NULL.
unsafe fn opt_str<'a>(p: *const c_char) -> Result<Option<&'a str>, StepwiseStatus> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| fail(StepwiseStatus::InvalidUtf8, "argument is not valid UTF-8"))
}

unsafe fn req_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, StepwiseStatus> {
    opt_str(p)?.ok_or_else(|| fail(StepwiseStatus::NullArgument, format!("`{name}` must not be NULL")))
}

fn guarded(f: impl FnOnce() -> Result<(), StepwiseStatus>) -> StepwiseStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => StepwiseStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(StepwiseStatus::Internal, "internal error (panic) in the stepwise library"),
    }
}

fn status_for(kind: &str) -> StepwiseStatus {
    match kind {
        "parse" => StepwiseStatus::ParseError,
        "budget" | "stuck" | "strategy" => StepwiseStatus::EvaluationError,
        "nostep" => StepwiseStatus::NoStep,
        "prelude" => StepwiseStatus::PreludeError,
        "request" => StepwiseStatus::InvalidArgument,
        _ => StepwiseStatus::Internal,
    }
}

unsafe fn write_string(out: *mut *mut c_char, text: String) -> Result<(), StepwiseStatus> {
    let c = CString::new(text).map_err(|_| fail(StepwiseStatus::Internal, "response contains a NUL byte"))?;
    *out = c.into_raw();
    Ok(())
}

/// Creates an engine.
///
/// `prelude` is the text of a prelude file, or NULL for the default prelude.
/// `script` is the text of a feedback script, or NULL for none. A `budget`
/// of 0 selects the default step budget. `flags` is a combination of
/// `STEPWISE_FLAG_*` values.
///
/// # Safety
/// `prelude` and `script` must be NULL or valid NUL-terminated strings;
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn stepwise_engine_new(
    prelude: *const c_char,
    script: *const c_char,
    budget: usize,
    flags: u32,
    out: *mut *mut StepwiseEngine,
) -> StepwiseStatus {
    guarded(|| {
        if out.is_null() {
            return Err(fail(StepwiseStatus::NullArgument, "`out` must not be NULL"));
        }
        *out = ptr::null_mut();
        let no_builtins = flags & STEPWISE_FLAG_NO_BUILTINS != 0;
        let mut builder = Engine::builder().builtins(!no_builtins);
        match opt_str(prelude)? {
            Some(text) => builder = builder.prelude(text),
            None if no_builtins => builder = builder.prelude(stepwise::engine::STANDARD_PRELUDE),
            None => {}
        }
        if budget > 0 {
            builder = builder.budget(budget);
        }
        let engine = builder.build().map_err(|e| fail(StepwiseStatus::PreludeError, e.to_string()))?;
        let script = match opt_str(script)? {
            Some(text) => FeedbackScript::parse(text).map_err(|e| fail(StepwiseStatus::ScriptError, e.to_string()))?,
            None => FeedbackScript::default(),
        };
        let handle = Box::new(StepwiseEngine { service: Service::new(Arc::new(engine), script) });
        *out = Box::into_raw(handle);
        Ok(())
    })
}

/// Releases an engine. NULL is ignored.
///
/// # Safety
/// `engine` must be NULL or a handle from [`stepwise_engine_new`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn stepwise_engine_free(engine: *mut StepwiseEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a string returned by this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn stepwise_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message describing the last failure on this thread, or NULL. The
/// pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn stepwise_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn stepwise_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version contains NUL"),
    };
    VERSION.as_ptr()
}

/// Handles a JSON service request and writes the JSON response to `out`.
/// The status is `Ok` whenever a response was produced, including
/// responses that report an error.
///
/// # Safety
/// `engine` must be a live handle, `request_json` a valid NUL-terminated
/// string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stepwise_service_call(
    engine: *const StepwiseEngine,
    request_json: *const c_char,
    out: *mut *mut c_char,
) -> StepwiseStatus {
    guarded(|| {
        let engine = engine_ref(engine)?;
        let out = out_ref(out)?;
        let body = req_str(request_json, "request_json")?;
        write_string(out, engine.service.handle_json(body))
    })
}

unsafe fn engine_ref<'a>(engine: *const StepwiseEngine) -> Result<&'a StepwiseEngine, StepwiseStatus> {
    engine.as_ref().ok_or_else(|| fail(StepwiseStatus::NullArgument, "`engine` must not be NULL"))
}

unsafe fn out_ref(out: *mut *mut c_char) -> Result<*mut *mut c_char, StepwiseStatus> {
    if out.is_null() {
        return Err(fail(StepwiseStatus::NullArgument, "`out` must not be NULL"));
    }
    *out = ptr::null_mut();
    Ok(out)
}

/// Runs one service and converts an error response into a status, keeping
/// the response JSON available in `out` either way.
unsafe fn call(
    engine: *const StepwiseEngine,
    service: &str,
    expr: *const c_char,
    submitted: Option<*const c_char>,
    strategy: *const c_char,
    out: *mut *mut c_char,
) -> StepwiseStatus {
    guarded(|| {
        let engine = engine_ref(engine)?;
        let out = out_ref(out)?;
        let request = ServiceRequest {
            service: service.to_string(),
            expr: Some(req_str(expr, "expr")?.to_string()),
            submitted: match submitted {
                Some(p) => Some(req_str(p, "submitted")?.to_string()),
                None => None,
            },
            strategy: opt_str(strategy)?.map(str::to_string),
        };
        let response: ServiceResponse = engine.service.handle(&request);
        let text = serde_json::to_string(&response).map_err(|e| fail(StepwiseStatus::Internal, e.to_string()))?;
        write_string(out, text)?;
        match &response.error {
            Some(e) => Err(fail(status_for(&e.kind), e.message.clone())),
            None => Ok(()),
        }
    })
}

/// Full derivation of `expr` as JSON. `strategy` is `"outermost"`,
/// `"innermost"` or NULL (outermost).
///
/// # Safety
/// Pointers must be valid as for [`stepwise_service_call`]; `strategy` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn stepwise_derive(
    engine: *const StepwiseEngine,
    expr: *const c_char,
    strategy: *const c_char,
    out: *mut *mut c_char,
) -> StepwiseStatus {
    call(engine, "derivation", expr, None, strategy, out)
}

/// The next step of the strategy as JSON.
///
/// # Safety
/// As for [`stepwise_derive`].
#[no_mangle]
pub unsafe extern "C" fn stepwise_hint(
    engine: *const StepwiseEngine,
    expr: *const c_char,
    strategy: *const c_char,
    out: *mut *mut c_char,
) -> StepwiseStatus {
    call(engine, "onefirst", expr, None, strategy, out)
}

/// Diagnosis of `submitted` as the next step after `expr`, as JSON.
/// `strategy` may also be `"free"`.
///
/// # Safety
/// As for [`stepwise_derive`]; `submitted` must be a valid string.
#[no_mangle]
pub unsafe extern "C" fn stepwise_diagnose(
    engine: *const StepwiseEngine,
    expr: *const c_char,
    submitted: *const c_char,
    strategy: *const c_char,
    out: *mut *mut c_char,
) -> StepwiseStatus {
    call(engine, "diagnose", expr, Some(submitted), strategy, out)
}

/// Number of steps left in the derivation of `expr`.
///
/// # Safety
/// `engine` must be a live handle, `expr` a valid string, `strategy` NULL or
/// a valid string and `count` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stepwise_steps_remaining(
    engine: *const StepwiseEngine,
    expr: *const c_char,
    strategy: *const c_char,
    count: *mut usize,
) -> StepwiseStatus {
    if count.is_null() {
        clear_error();
        return fail(StepwiseStatus::NullArgument, "`count` must not be NULL");
    }
    let mut json: *mut c_char = ptr::null_mut();
    let status = call(engine, "stepsremaining", expr, None, strategy, &mut json);
    if status == StepwiseStatus::Ok {
        let text = CStr::from_ptr(json).to_string_lossy().into_owned();
        let steps = serde_json::from_str::<ServiceResponse>(&text).ok().and_then(|r| r.payload["steps"].as_u64());
        *count = steps.map_or(0, |n| n as usize);
    }
    stepwise_string_free(json);
    status
}
