use std::ffi::{CStr, CString};
use std::ptr;

use invariant_kit_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(ik_last_error_message()) }.to_string_lossy().into_owned()
}

const APPENDIX: &str = r#"{
  "kind": "mcbf",
  "states": ["x"],
  "expressions": {
    "f": ["0"], "g": [["1"]], "h": "x", "mu": "w",
    "A": [["1"], ["-1"]], "b": ["1", "1"], "k_nom": ["0"]
  },
  "domain": { "lo": [-2], "hi": [2], "grid": [41] },
  "jobs": [{ "job": "classify" }]
}"#;

#[test]
fn expression_round_trip() {
    let names = [c("x"), c("y")];
    let vars: Vec<_> = names.iter().map(|n| n.as_ptr()).collect();
    let mut e = ptr::null_mut();
    unsafe {
        assert_eq!(ik_expr_parse(c("x^2*y + abs(y)").as_ptr(), vars.as_ptr(), 2, &mut e), IkStatus::Ok);
        assert_eq!(ik_expr_arity(e), 2);
        let mut v = 0.0;
        assert_eq!(ik_expr_eval(e, [3.0, 2.0].as_ptr(), 2, &mut v), IkStatus::Ok);
        assert_eq!(v, 20.0);
        let mut g = [0.0; 2];
        let mut kink = true;
        assert_eq!(ik_expr_grad(e, [3.0, 2.0].as_ptr(), 2, g.as_mut_ptr(), &mut kink), IkStatus::Ok);
        assert_eq!(g, [12.0, 10.0]);
        assert!(!kink);
        assert_eq!(ik_expr_grad(e, [3.0, 0.0].as_ptr(), 2, g.as_mut_ptr(), &mut kink), IkStatus::Ok);
        assert!(kink);
        let mut s = ptr::null_mut();
        assert_eq!(ik_expr_print(e, &mut s), IkStatus::Ok);
        assert!(!CStr::from_ptr(s).to_bytes().is_empty());
        ik_string_free(s);
        assert_eq!(ik_expr_eval(e, [1.0].as_ptr(), 1, &mut v), IkStatus::Dimension);
        ik_expr_free(e);
    }
}

#[test]
fn errors_are_reported() {
    let name = c("x");
    let vars = [name.as_ptr()];
    let mut e = ptr::null_mut();
    unsafe {
        assert_eq!(ik_expr_parse(c("x +").as_ptr(), vars.as_ptr(), 1, &mut e), IkStatus::Parse);
        assert!(e.is_null());
        assert!(last_error().contains("syntax"));
        assert_eq!(ik_expr_parse(c("ln(x)").as_ptr(), vars.as_ptr(), 1, &mut e), IkStatus::Ok);
        assert!(last_error().is_empty());
        let mut v = 0.0;
        assert_eq!(ik_expr_eval(e, [-1.0].as_ptr(), 1, &mut v), IkStatus::Domain);
        assert_eq!(ik_expr_eval(ptr::null(), [1.0].as_ptr(), 1, &mut v), IkStatus::NullPointer);
        ik_expr_free(e);
        ik_expr_free(ptr::null_mut());
        assert_eq!(ik_expr_parse(ptr::null(), vars.as_ptr(), 1, &mut e), IkStatus::NullPointer);
    }
}

#[test]
fn classify_mu() {
    let mut code = -1;
    let mut json = ptr::null_mut();
    unsafe {
        assert_eq!(ik_classify_mu(c("3*cbrt(w)^2").as_ptr(), false, false, &mut code, &mut json), IkStatus::Ok);
        assert_eq!(code, 1);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        ik_string_free(json);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["status"], "not_minimal");
        assert_eq!(ik_classify_mu(c("w - 1").as_ptr(), false, false, &mut code, ptr::null_mut()), IkStatus::Ok);
        assert_eq!(code, 0);
    }
}

#[test]
fn safety_filter() {
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(ik_control_problem_from_json(c(APPENDIX).as_ptr(), &mut p), IkStatus::Ok, "{}", last_error());
        let (mut n, mut m) = (0, 0);
        assert_eq!(ik_control_problem_dims(p, &mut n, &mut m), IkStatus::Ok);
        assert_eq!((n, m), (1, 1));
        let mut u = [f64::NAN];
        let mut feasible = false;
        for x in [-0.75, -0.25, 0.0, 1.5] {
            assert_eq!(ik_qp_filter(p, [x].as_ptr(), 1, u.as_mut_ptr(), 1, &mut feasible), IkStatus::Ok);
            assert!(feasible);
            assert!((u[0] - f64::max(0.0, -x)).abs() < 1e-12);
        }
        assert_eq!(ik_qp_filter(p, [-2.0].as_ptr(), 1, u.as_mut_ptr(), 1, &mut feasible), IkStatus::Ok);
        assert!(!feasible);
        assert_eq!(ik_qp_filter(p, [0.0, 0.0].as_ptr(), 2, u.as_mut_ptr(), 1, &mut feasible), IkStatus::Dimension);
        ik_control_problem_free(p);

        let mbf = APPENDIX.replace("\"mcbf\"", "\"mbf\"");
        assert_eq!(ik_control_problem_from_json(c(&mbf).as_ptr(), &mut p), IkStatus::Config);
        assert!(p.is_null());
    }
}

#[test]
fn run_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("appendix.json");
    std::fs::write(&cfg, APPENDIX).unwrap();
    let out = dir.path().join("out");
    let mut code = -1;
    let mut report = ptr::null_mut();
    unsafe {
        let status = ik_run_config(
            c(cfg.to_str().unwrap()).as_ptr(),
            c(out.to_str().unwrap()).as_ptr(),
            0,
            &mut code,
            &mut report,
        );
        assert_eq!(status, IkStatus::Ok, "{}", last_error());
        assert_eq!(code, 0);
        let path = CStr::from_ptr(report).to_str().unwrap().to_owned();
        ik_string_free(report);
        assert!(std::path::Path::new(&path).exists());
        let missing = dir.path().join("missing.json");
        let status =
            ik_run_config(c(missing.to_str().unwrap()).as_ptr(), ptr::null(), 0, &mut code, ptr::null_mut());
        assert_eq!(status, IkStatus::Config);
        assert!(last_error().contains("missing.json"));
    }
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(ik_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
