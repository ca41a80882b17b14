use std::ffi::{CStr, CString};
use std::ptr;

use xorflow_ffi::*;

const LINE: &str = r#"{
  "mode": "wired",
  "nodes": ["a", "b"],
  "links": [{"from": "a", "to": "b", "cap": 1}],
  "sessions": [{"src": "a", "dst": "b", "rate": 0.5}]
}"#;

fn last_error() -> String {
    unsafe { CStr::from_ptr(xf_last_error()) }.to_string_lossy().into_owned()
}

fn parse(text: &str) -> (XfStatus, *mut XfInstance) {
    let json = CString::new(text).unwrap();
    let mut inst = ptr::null_mut();
    let st = unsafe { xf_instance_parse(json.as_ptr(), &mut inst) };
    (st, inst)
}

#[test]
fn parse_run_export_verify() {
    let (st, inst) = parse(LINE);
    assert_eq!(st, XfStatus::Ok);
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { xf_run(inst, ptr::null(), &mut run) }, XfStatus::Ok);
    assert!(unsafe { xf_run_converged(run) });
    assert!(unsafe { xf_run_rounds(run) } > 0);

    let mut rate = 0.0;
    assert_eq!(unsafe { xf_run_achieved_rate(run, 0, &mut rate) }, XfStatus::Ok);
    assert!((rate - 0.5).abs() <= 0.05, "rate {rate}");
    assert_eq!(unsafe { xf_run_achieved_rate(run, 3, &mut rate) }, XfStatus::UnknownIndex);

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { xf_run_solution_json(run, &mut json) }, XfStatus::Ok);
    let (mut pass, mut resid) = (false, f64::NAN);
    assert_eq!(unsafe { xf_verify(inst, json, 0.0, &mut pass, &mut resid) }, XfStatus::Ok);
    assert!(pass);
    assert!(resid <= 0.05);

    // Tamper with the exported solution and verify again.
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    let tampered = CString::new(bump_first_nu(&text, 0.2)).unwrap();
    assert_eq!(unsafe { xf_verify(inst, tampered.as_ptr(), 1e-6, &mut pass, ptr::null_mut()) }, XfStatus::Ok);
    assert!(!pass);

    unsafe {
        xf_string_free(json);
        xf_run_free(run);
        xf_instance_free(inst);
    }
}

/// Adds `delta` to the first `val` after the `"nu"` key; a plain text edit
/// keeps this test free of a JSON dependency.
fn bump_first_nu(s: &str, delta: f64) -> String {
    let nu = s.find("\"nu\"").unwrap();
    let at = nu + s[nu..].find("\"val\":").unwrap() + "\"val\":".len();
    let rest = &s[at..];
    let end = rest.find([',', '}', '\n']).unwrap();
    let old: f64 = rest[..end].trim().parse().unwrap();
    format!("{}{}{}", &s[..at], old + delta, &rest[end..])
}

#[test]
fn malformed_instance_is_invalid_input() {
    let (st, inst) = parse("{ not json");
    assert_eq!(st, XfStatus::InvalidInput);
    assert!(inst.is_null());
    assert!(!last_error().is_empty());

    let (st, _) = parse(&LINE.replace(r#""dst": "b""#, r#""dst": "a""#));
    assert_eq!(st, XfStatus::InvalidInput);
}

#[test]
fn bad_epsilon_is_invalid_config() {
    let (_, inst) = parse(LINE);
    let mut cfg = xf_run_config_default();
    cfg.epsilon = 0.9;
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { xf_run(inst, &cfg, &mut run) }, XfStatus::InvalidConfig);
    assert!(run.is_null());
    assert!(last_error().contains("0.9"), "{}", last_error());
    unsafe { xf_instance_free(inst) };
}

#[test]
fn null_arguments_are_reported() {
    let mut inst = ptr::null_mut();
    assert_eq!(unsafe { xf_instance_parse(ptr::null(), &mut inst) }, XfStatus::NullPointer);
    let json = CString::new(LINE).unwrap();
    assert_eq!(unsafe { xf_instance_parse(json.as_ptr(), ptr::null_mut()) }, XfStatus::NullPointer);
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { xf_run(ptr::null(), ptr::null(), &mut run) }, XfStatus::NullPointer);
    assert!(!unsafe { xf_run_converged(ptr::null()) });
    assert_eq!(unsafe { xf_run_rounds(ptr::null()) }, 0);
    // Freeing null is a no-op.
    unsafe {
        xf_instance_free(ptr::null_mut());
        xf_run_free(ptr::null_mut());
        xf_string_free(ptr::null_mut());
    }
}

#[test]
fn invalid_utf8_rejected() {
    let bytes = CString::new(vec![0xff, 0xfe]).unwrap();
    let mut inst = ptr::null_mut();
    assert_eq!(unsafe { xf_instance_parse(bytes.as_ptr(), &mut inst) }, XfStatus::InvalidUtf8);
}

#[test]
fn config_defaults() {
    let cfg = xf_run_config_default();
    assert_eq!(cfg.epsilon, 0.1);
    assert_eq!(cfg.kappa, 1.0);
    assert_eq!((cfg.big_l, cfg.big_f), (0, 0));
    assert!(cfg.fast_index && !cfg.routing_only);
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/xorflow.h")).unwrap();
    for sym in [
        "XORFLOW_H",
        "XF_STATUS_OK",
        "XF_STATUS_INVALID_CONFIG",
        "typedef struct XfInstance XfInstance",
        "typedef struct XfRun XfRun",
        "XfRunConfig",
        "xf_instance_parse",
        "xf_run(",
        "xf_run_solution_json",
        "xf_verify",
        "xf_last_error",
        "xf_string_free",
    ] {
        assert!(header.contains(sym), "header lacks {sym}");
    }
}
