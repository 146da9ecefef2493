//! C ABI over the model checker: build a session from a scenario, check
//! specifications, evaluate formulas and synthesize predicates.
//!
//! Every function returns a [`KbpStatus`]. On anything other than `Ok` or
//! `Fails`, [`kbp_last_error`] describes the problem. Strings returned
//! through out-parameters are owned by the caller and released with
//! [`kbp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use kbpcheck::dc::{
    candidate_system, check_spec, dc_system, synthesize_kc, DcParams, Implementation, Mode,
    PredicateSet, ScenarioFile, SpecId,
};
use kbpcheck::engine::EngineMode;
use kbpcheck::refine::synthesize_predicate;
use kbpcheck::{parse_formula, Error, InterpretedSystem, Point};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KbpStatus {
    /// Success; for checks, the property holds.
    Ok = 0,
    /// The check ran and the property fails.
    Fails = 1,
    /// Bad argument, unknown name, or out-of-range value.
    Usage = 2,
    /// Malformed formula, predicate or JSON.
    Syntax = 3,
    /// The model or scenario cannot be built.
    Model = 4,
    NullPointer = 5,
    /// Internal panic, caught at the boundary.
    Panic = 6,
}

/// A built run set and the parameters that produced it.
pub struct KbpSession {
    params: DcParams,
    engine: EngineMode,
    sys: InterpretedSystem,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn status_of(e: &Error) -> KbpStatus {
    match e {
        Error::Syntax { .. } => KbpStatus::Syntax,
        Error::Model(_) | Error::Unsatisfiable | Error::KnowledgeInProgram => KbpStatus::Model,
        _ => KbpStatus::Usage,
    }
}

/// Run `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<KbpStatus, (KbpStatus, String)>) -> KbpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            KbpStatus::Panic
        }
    }
}

fn fail(e: Error) -> (KbpStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (KbpStatus, String) {
    (KbpStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (KbpStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (KbpStatus::Usage, format!("`{what}` is not UTF-8")))
}

fn give_string(s: String, out: *mut *mut c_char) {
    let c = CString::new(s.replace('\0', " ")).expect("nul bytes removed");
    unsafe { *out = c.into_raw() };
}

/// Session settings: a scenario file object plus optional `engine`
/// ("reduced" | "naive"), `predicates` ("reference" | "synthesized") and
/// `implementation` ("candidate" | "kbp").
fn build_session(config: &str) -> Result<KbpSession, (KbpStatus, String)> {
    let mut v: serde_json::Value = serde_json::from_str(config)
        .map_err(|e| (KbpStatus::Syntax, format!("session config: {e}")))?;
    let obj = v.as_object_mut().ok_or_else(|| {
        (
            KbpStatus::Syntax,
            "session config must be an object".to_string(),
        )
    })?;
    let mut take = |key: &str, default: &str| -> Result<String, (KbpStatus, String)> {
        match obj.remove(key) {
            None => Ok(default.to_string()),
            Some(serde_json::Value::String(s)) => Ok(s),
            Some(_) => Err((KbpStatus::Syntax, format!("`{key}` must be a string"))),
        }
    };
    let engine = match take("engine", "reduced")?.as_str() {
        "reduced" => EngineMode::Reduced,
        "naive" => EngineMode::Naive,
        other => return Err((KbpStatus::Usage, format!("unknown engine `{other}`"))),
    };
    let predicates = take("predicates", "reference")?;
    let implementation = take("implementation", "candidate")?;
    if !obj.contains_key("scenario") {
        obj.insert("scenario".into(), "unknown".into());
    }
    let file: ScenarioFile = serde_json::from_value(v)
        .map_err(|e| (KbpStatus::Syntax, format!("session config: {e}")))?;
    let params = file.params(3, Mode::Speculative).map_err(fail)?;
    let reference = PredicateSet::reference(params.slots).map_err(fail)?;
    let sys = match (implementation.as_str(), predicates.as_str()) {
        ("kbp", _) => {
            dc_system(&params, &Implementation::Kbp, engine)
                .map_err(fail)?
                .1
        }
        ("candidate", "reference") => {
            candidate_system(&params, &reference, engine).map_err(fail)?
        }
        ("candidate", "synthesized") => {
            let set = synthesize_kc(&params, engine, &reference).map_err(fail)?.0;
            candidate_system(&params, &set, engine).map_err(fail)?
        }
        ("candidate", other) => {
            return Err((
                KbpStatus::Usage,
                format!("unknown predicate source `{other}`"),
            ))
        }
        (other, _) => {
            return Err((
                KbpStatus::Usage,
                format!("unknown implementation `{other}`"),
            ))
        }
    };
    Ok(KbpSession {
        params,
        engine,
        sys,
    })
}

/// Build a session. `config` is a JSON object (see the crate docs) or null
/// for the default three-slot, unknown-senders, speculative setting.
///
/// # Safety
/// `config` must be null or a valid NUL-terminated string; `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kbp_session_new(
    config: *const c_char,
    out: *mut *mut KbpSession,
) -> KbpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let cfg = if config.is_null() {
            "{}"
        } else {
            text(config, "config")?
        };
        let session = build_session(cfg)?;
        *out = Box::into_raw(Box::new(session));
        Ok(KbpStatus::Ok)
    })
}

/// # Safety
/// `session` must be null or a pointer from [`kbp_session_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kbp_session_free(session: *mut KbpSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Number of runs in the session's system (0 for a null session).
///
/// # Safety
/// `session` must be null or a live session.
#[no_mangle]
pub unsafe extern "C" fn kbp_run_count(session: *const KbpSession) -> usize {
    session.as_ref().map_or(0, |s| s.sys.run_count())
}

/// Last time step of the session's runs (0 for a null session).
///
/// # Safety
/// `session` must be null or a live session.
#[no_mangle]
pub unsafe extern "C" fn kbp_horizon(session: *const KbpSession) -> usize {
    session.as_ref().map_or(0, |s| s.sys.horizon())
}

/// Check a specification ("1s", "1c", "2", "3", "4a", "4b", "5", "6") at
/// every agent and slot. Returns `Ok` if it holds, `Fails` otherwise; if
/// `report_json` is non-null it receives the JSON report.
///
/// # Safety
/// `session` must be a live session, `spec` a valid string, `report_json`
/// null or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kbp_check_spec(
    session: *const KbpSession,
    spec: *const c_char,
    report_json: *mut *mut c_char,
) -> KbpStatus {
    guard(|| {
        let s = session.as_ref().ok_or_else(|| null("session"))?;
        let id: SpecId = text(spec, "spec")?.parse().map_err(fail)?;
        let report = check_spec(&s.sys, &s.params, id, None, None).map_err(fail)?;
        if !report_json.is_null() {
            give_string(report.to_json().to_string(), report_json);
        }
        Ok(if report.holds() {
            KbpStatus::Ok
        } else {
            KbpStatus::Fails
        })
    })
}

/// Evaluate `formula` at (`run`, `time`) and store the truth value.
///
/// # Safety
/// `session` must be a live session, `formula` a valid string, `result` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kbp_eval(
    session: *const KbpSession,
    formula: *const c_char,
    run: usize,
    time: usize,
    result: *mut bool,
) -> KbpStatus {
    guard(|| {
        let s = session.as_ref().ok_or_else(|| null("session"))?;
        if result.is_null() {
            return Err(null("result"));
        }
        let vocab = s.params.vocabulary().map_err(fail)?;
        let f = parse_formula(text(formula, "formula")?, &vocab).map_err(fail)?;
        *result = kbpcheck::eval_at(&s.sys, &f, Point::new(run, time)).map_err(fail)?;
        Ok(KbpStatus::Ok)
    })
}

/// Synthesize the exact local predicate for `formula` (a knowledge formula
/// about `agent`) at `time`, written to `predicate` in the predicate
/// grammar. `Usage` if the value is not determined by the agent's state.
///
/// # Safety
/// `session` must be a live session, `formula` and `agent` valid strings,
/// `predicate` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kbp_synthesize(
    session: *const KbpSession,
    formula: *const c_char,
    agent: *const c_char,
    time: usize,
    predicate: *mut *mut c_char,
) -> KbpStatus {
    guard(|| {
        let s = session.as_ref().ok_or_else(|| null("session"))?;
        if predicate.is_null() {
            return Err(null("predicate"));
        }
        let vocab = s.params.vocabulary().map_err(fail)?;
        let f = parse_formula(text(formula, "formula")?, &vocab).map_err(fail)?;
        let syn = synthesize_predicate(&s.sys, &f, text(agent, "agent")?, time).map_err(fail)?;
        let t = syn.text().ok_or_else(|| {
            (
                KbpStatus::Model,
                "no closed form over the agent's observations".to_string(),
            )
        })?;
        give_string(t, predicate);
        Ok(KbpStatus::Ok)
    })
}

/// "reduced" or "naive", as a static string.
///
/// # Safety
/// `session` must be null or a live session.
#[no_mangle]
pub unsafe extern "C" fn kbp_engine_name(session: *const KbpSession) -> *const c_char {
    match session.as_ref().map(|s| s.engine) {
        Some(EngineMode::Naive) => c"naive".as_ptr(),
        Some(EngineMode::Reduced) => c"reduced".as_ptr(),
        None => ptr::null(),
    }
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn kbp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kbp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
