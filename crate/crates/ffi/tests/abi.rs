//! The C ABI called from Rust.

use std::ffi::{c_char, CStr, CString};
use std::ptr;

use idg_ffi::*;

const BET_PASS: &str = r#"{
  "schema_version": 1,
  "nodes": [
    {"id": "C", "kind": "chance", "outcomes": ["win", "lose"], "parents": [], "table": [[0.4, 0.6]]},
    {"id": "D", "kind": "decision", "outcomes": ["bet", "pass"], "parents": []},
    {"id": "V", "kind": "value", "parents": ["D", "C"], "payoffs": [100, -50, 0, 0], "risk_aversion": 0}
  ]
}"#;

const CHAIN: &str = r#"{
  "schema_version": 1,
  "nodes": [
    {"id": "a", "kind": "chance", "outcomes": ["0", "1"], "parents": [], "table": [[0.3, 0.7]]},
    {"id": "b", "kind": "chance", "outcomes": ["0", "1"], "parents": ["a"], "table": [[0.5, 0.5], [0.9, 0.1]]},
    {"id": "c", "kind": "chance", "outcomes": ["0", "1"], "parents": ["a", "b"], "table": [[1, 0], [0.2, 0.8], [0.5, 0.5], [0, 1]]},
    {"id": "v", "kind": "value", "parents": ["c"], "payoffs": [1, 2]}
  ]
}"#;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_owned();
    idg_string_free(s);
    out
}

unsafe fn last_code() -> String {
    CStr::from_ptr(idg_last_error_code())
        .to_str()
        .unwrap()
        .to_owned()
}

unsafe fn load(doc: &str) -> *mut IdgDiagram {
    let mut d = ptr::null_mut();
    assert_eq!(
        idg_diagram_load(doc.as_ptr(), doc.len(), 0, &mut d),
        IdgStatus::Ok
    );
    d
}

#[test]
fn solve_bet_pass() {
    unsafe {
        let d = load(BET_PASS);
        assert_eq!(idg_diagram_node_count(d), 3);
        let mut s = ptr::null_mut();
        assert_eq!(idg_solve(d, &mut s), IdgStatus::Ok);
        let mut value = 0.0;
        assert_eq!(idg_solution_optimal_value(s, &mut value), IdgStatus::Ok);
        assert_eq!(value, 10.0);
        assert_eq!(idg_solution_policy_count(s), 1);
        let mut choice = 9;
        assert_eq!(
            idg_solution_policy_choice(s, 0, 0, &mut choice),
            IdgStatus::Ok
        );
        assert_eq!(choice, 0);
        assert_eq!(
            idg_solution_policy_choice(s, 3, 0, &mut choice),
            IdgStatus::Precondition
        );

        let mut text = ptr::null_mut();
        assert_eq!(
            idg_solution_report(s, IDG_FORMAT_TEXT, 0, &mut text),
            IdgStatus::Ok
        );
        assert!(take(text).starts_with("optimal value: 10\n"));
        let mut json = ptr::null_mut();
        assert_eq!(
            idg_solution_report(s, IDG_FORMAT_JSON, 0, &mut json),
            IdgStatus::Ok
        );
        let v: serde_json::Value = serde_json::from_str(&take(json)).unwrap();
        assert_eq!(v["optimal_value"], 10.0);
        assert_eq!(
            idg_solution_report(s, 7, 0, &mut json),
            IdgStatus::Precondition
        );

        let mut voi = 0.0;
        let (c, dd) = (cstr("C"), cstr("D"));
        assert_eq!(
            idg_value_of_information(d, c.as_ptr(), dd.as_ptr(), &mut voi),
            IdgStatus::Ok
        );
        assert!((voi - 30.0).abs() < 1e-9);
        assert!(idg_last_error().is_null());

        idg_solution_free(s);
        idg_diagram_free(d);
    }
}

#[test]
fn reversal_and_errors() {
    unsafe {
        let d = load(CHAIN);
        let (a, b, c) = (cstr("a"), cstr("b"), cstr("c"));
        let mut out = ptr::null_mut();
        assert_eq!(
            idg_diagram_reverse_arc(d, a.as_ptr(), c.as_ptr(), &mut out),
            IdgStatus::Precondition
        );
        assert!(out.is_null());
        assert_eq!(last_code(), "REVERSAL_WOULD_CYCLE");
        let message = CStr::from_ptr(idg_last_error()).to_str().unwrap();
        assert!(message.contains("alternate path a->c exists"));

        assert_eq!(
            idg_diagram_reverse_arc(d, a.as_ptr(), b.as_ptr(), &mut out),
            IdgStatus::Ok
        );
        let mut count = 99;
        assert_eq!(
            idg_diagram_validate(out, &mut count, ptr::null_mut()),
            IdgStatus::Ok
        );
        assert_eq!(count, 0);
        let mut saved = ptr::null_mut();
        assert_eq!(idg_diagram_save(out, &mut saved), IdgStatus::Ok);
        let doc = take(saved);
        assert!(doc.contains("\"parents\": [\n        \"b\""), "{doc}");
        idg_diagram_free(out);

        let nope = cstr("nope");
        assert_eq!(
            idg_diagram_remove_node(d, nope.as_ptr(), &mut out),
            IdgStatus::UnknownNode
        );
        assert_eq!(last_code(), "UNKNOWN_NODE");
        let mut removed = ptr::null_mut();
        assert_eq!(
            idg_diagram_remove_node(d, c.as_ptr(), &mut removed),
            IdgStatus::Ok
        );
        assert_eq!(idg_diagram_node_count(removed), 3);
        idg_diagram_free(removed);

        let t = cstr(r#"{"kind": "reverse_arc", "from": "b", "to": "c"}"#);
        assert_eq!(
            idg_diagram_apply_transform(d, t.as_ptr(), &mut out),
            IdgStatus::Ok
        );
        idg_diagram_free(out);
        let bad = cstr(r#"{"kind": "teleport"}"#);
        assert_eq!(
            idg_diagram_apply_transform(d, bad.as_ptr(), &mut out),
            IdgStatus::ParseError
        );
        idg_diagram_free(d);
    }
}

#[test]
fn load_failures_and_flags() {
    unsafe {
        let mut d = ptr::null_mut();
        let junk = b"{ not json";
        assert_eq!(
            idg_diagram_load(junk.as_ptr(), junk.len(), 0, &mut d),
            IdgStatus::ParseError
        );
        assert_eq!(last_code(), "PARSE_ERROR");
        assert!(d.is_null());

        let bad = BET_PASS.replace("[[0.4, 0.6]]", "[[0.5, 0.6]]");
        assert_eq!(
            idg_diagram_load(bad.as_ptr(), bad.len(), 0, &mut d),
            IdgStatus::ParseError
        );
        assert_eq!(
            idg_diagram_load(bad.as_ptr(), bad.len(), IDG_LOAD_SKIP_VALIDATION, &mut d),
            IdgStatus::Ok
        );
        let mut count = 0;
        let mut report = ptr::null_mut();
        assert_eq!(
            idg_diagram_validate(d, &mut count, &mut report),
            IdgStatus::Ok
        );
        assert_eq!(count, 1);
        assert!(take(report).contains("ROW_NOT_NORMALIZED"));
        let mut s = ptr::null_mut();
        assert_eq!(idg_solve(d, &mut s), IdgStatus::InvalidDiagram);
        assert_eq!(last_code(), "VALIDATION_FAILED");
        idg_diagram_free(d);

        let near = BET_PASS.replace("[[0.4, 0.6]]", "[[0.4, 0.6000001]]");
        assert_eq!(
            idg_diagram_load(near.as_ptr(), near.len(), IDG_LOAD_RENORMALIZE, &mut d),
            IdgStatus::Ok
        );
        idg_diagram_free(d);
    }
}

#[test]
fn null_arguments_are_rejected() {
    unsafe {
        let mut d = ptr::null_mut();
        assert_eq!(
            idg_diagram_load(ptr::null(), 0, 0, &mut d),
            IdgStatus::NullPointer
        );
        assert_eq!(
            idg_diagram_load(BET_PASS.as_ptr(), BET_PASS.len(), 0, ptr::null_mut()),
            IdgStatus::NullPointer
        );
        let mut s = ptr::null_mut();
        assert_eq!(idg_solve(ptr::null(), &mut s), IdgStatus::NullPointer);
        let mut v = 0.0;
        assert_eq!(
            idg_solution_optimal_value(ptr::null(), &mut v),
            IdgStatus::NullPointer
        );
        assert_eq!(idg_diagram_node_count(ptr::null()), 0);
        let loaded = load(BET_PASS);
        assert_eq!(
            idg_diagram_reverse_arc(loaded, ptr::null(), ptr::null(), &mut d),
            IdgStatus::NullPointer
        );
        let invalid = [0xffu8, 0];
        let c = cstr("C");
        assert_eq!(
            idg_value_of_information(loaded, invalid.as_ptr().cast(), c.as_ptr(), &mut v),
            IdgStatus::InvalidString
        );
        idg_diagram_free(loaded);
        idg_diagram_free(ptr::null_mut());
        idg_solution_free(ptr::null_mut());
        idg_string_free(ptr::null_mut());
    }
}

#[test]
fn errors_are_per_thread() {
    unsafe {
        let mut d = ptr::null_mut();
        let junk = b"[]";
        assert_ne!(
            idg_diagram_load(junk.as_ptr(), junk.len(), 0, &mut d),
            IdgStatus::Ok
        );
        assert!(!idg_last_error().is_null());
    }
    std::thread::spawn(|| assert!(idg_last_error().is_null()))
        .join()
        .unwrap();
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(idg_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
