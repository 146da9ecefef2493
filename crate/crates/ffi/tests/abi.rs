use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use kbpcheck_ffi::*;

fn session(config: Option<&str>) -> *mut KbpSession {
    let cfg = config.map(|c| CString::new(c).unwrap());
    let mut s = ptr::null_mut();
    let st = unsafe { kbp_session_new(cfg.as_ref().map_or(ptr::null(), |c| c.as_ptr()), &mut s) };
    assert_eq!(st, KbpStatus::Ok, "{:?}", last_error());
    s
}

fn last_error() -> Option<String> {
    let p = kbp_last_error();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

fn check(s: *const KbpSession, spec: &str) -> (KbpStatus, Option<serde_json::Value>) {
    let spec = CString::new(spec).unwrap();
    let mut report = ptr::null_mut();
    let st = unsafe { kbp_check_spec(s, spec.as_ptr(), &mut report) };
    let json = (!report.is_null()).then(|| {
        let v = serde_json::from_str(unsafe { CStr::from_ptr(report) }.to_str().unwrap()).unwrap();
        unsafe { kbp_string_free(report) };
        v
    });
    (st, json)
}

#[test]
fn default_session_checks_specs() {
    let s = session(None);
    unsafe {
        assert_eq!(kbp_run_count(s), 512);
        assert_eq!(kbp_horizon(s), 6);
        assert_eq!(
            CStr::from_ptr(kbp_engine_name(s)).to_str().unwrap(),
            "reduced"
        );
    }
    let (st, report) = check(s, "1s");
    assert_eq!(st, KbpStatus::Ok);
    assert_eq!(report.unwrap()["verdict"], "holds");
    let (st, report) = check(s, "2");
    assert_eq!(st, KbpStatus::Fails);
    assert_eq!(report.unwrap()["witnesses"].as_array().unwrap().len(), 2);
    assert_eq!(check(s, "bogus").0, KbpStatus::Usage);
    assert!(last_error().unwrap().contains("bogus"));
    unsafe { kbp_session_free(s) };
}

#[test]
fn pinned_session_evaluates_and_synthesizes() {
    let s = session(Some(
        r#"{"scenario":"pinned","pinned":{"slot_request":[2,2,2],"msg":[1,1,1]}}"#,
    ));
    let f = CString::new("K[C1](conflict(2))").unwrap();
    let mut out = false;
    assert_eq!(
        unsafe { kbp_eval(s, f.as_ptr(), 0, 6, &mut out) },
        KbpStatus::Ok
    );
    assert!(out);
    let bad = CString::new("K[C1](").unwrap();
    assert_eq!(
        unsafe { kbp_eval(s, bad.as_ptr(), 0, 6, &mut out) },
        KbpStatus::Syntax
    );
    assert_eq!(
        unsafe { kbp_eval(s, f.as_ptr(), 5, 6, &mut out) },
        KbpStatus::Usage
    );
    unsafe { kbp_session_free(s) };

    let s = session(Some(r#"{"engine":"reduced"}"#));
    let f = CString::new("K[C1](C1.msg == 1)").unwrap();
    let agent = CString::new("C1").unwrap();
    let mut pred = ptr::null_mut();
    assert_eq!(
        unsafe { kbp_synthesize(s, f.as_ptr(), agent.as_ptr(), 6, &mut pred) },
        KbpStatus::Ok
    );
    assert_eq!(unsafe { CStr::from_ptr(pred) }.to_str().unwrap(), "msg");
    unsafe { kbp_string_free(pred) };
    unsafe { kbp_session_free(s) };
}

#[test]
fn errors_are_reported_not_raised() {
    let mut s = ptr::null_mut();
    let cfg = CString::new(r#"{"scenario":"bogus"}"#).unwrap();
    assert_eq!(
        unsafe { kbp_session_new(cfg.as_ptr(), &mut s) },
        KbpStatus::Usage
    );
    assert!(s.is_null());
    let cfg = CString::new("not json").unwrap();
    assert_eq!(
        unsafe { kbp_session_new(cfg.as_ptr(), &mut s) },
        KbpStatus::Syntax
    );
    assert_eq!(
        unsafe { kbp_session_new(ptr::null(), ptr::null_mut()) },
        KbpStatus::NullPointer
    );
    assert_eq!(check(ptr::null(), "1s").0, KbpStatus::NullPointer);
    unsafe {
        assert_eq!(kbp_run_count(ptr::null()), 0);
        kbp_session_free(ptr::null_mut());
        kbp_string_free(ptr::null_mut());
    }
    let conservative = session(Some(
        r#"{"mode":"conservative","predicates":"synthesized"}"#,
    ));
    assert_eq!(check(conservative, "1c").0, KbpStatus::Ok);
    unsafe { kbp_session_free(conservative) };
}

#[test]
fn header_compiles_as_c() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        r#"#include "kbpcheck.h"
int probe(void) {
    KbpSession *s = 0;
    KbpStatus st = kbp_session_new(0, &s);
    char *report = 0;
    bool out = false;
    st = kbp_check_spec(s, "2", &report);
    st = kbp_eval(s, "true", 0, 0, &out);
    kbp_string_free(report);
    kbp_session_free(s);
    return st == KBP_STATUS_OK && kbp_last_error() == 0 && kbp_run_count(s) == 0 && kbp_horizon(s) == 0;
}
"#,
    )
    .unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let Ok(status) = Command::new("cc")
        .args([
            "-std=c99",
            "-Wall",
            "-Werror",
            "-fsyntax-only",
            "-I",
            include,
        ])
        .arg(&src)
        .status()
    else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(status.success());
}
