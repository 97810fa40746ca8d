use std::ffi::{CStr, CString};
use std::ptr;

use pdflow_ffi::*;

fn last_error() -> String {
    let p = pdflow_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn symbol_round_trip() {
    let src = CString::new("[[0, 4], [1, 0]]").unwrap();
    let mut sym = ptr::null_mut();
    unsafe {
        assert_eq!(pdflow_symbol_parse(src.as_ptr(), 1, 0.0, &mut sym), PdflowStatus::Ok);
        assert_eq!(pdflow_symbol_size(sym), 2);
        assert_eq!(pdflow_symbol_dim(sym), 1);
        let (mut re, mut im) = ([0.0; 4], [0.0; 4]);
        assert_eq!(pdflow_symbol_eval(sym, &0.3, &1.0, 0.0, re.as_mut_ptr(), im.as_mut_ptr()), PdflowStatus::Ok);
        assert_eq!(re, [0.0, 4.0, 1.0, 0.0]);
        let (mut gs, mut gg) = (0.0, 0.0);
        assert_eq!(pdflow_symbol_rates(sym, 32, 15, 0.125, &mut gs, &mut gg), PdflowStatus::Ok);
        assert!((gs - 2.0).abs() < 1e-12 && (gg - 2.5).abs() < 1e-12, "{gs} {gg}");
        pdflow_symbol_free(sym);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let bad = CString::new("[[1, 2], [3]]").unwrap();
    let mut sym = ptr::null_mut();
    unsafe {
        assert_eq!(pdflow_symbol_parse(bad.as_ptr(), 1, 0.0, &mut sym), PdflowStatus::Parse);
        assert!(sym.is_null());
        assert_eq!(pdflow_symbol_parse(ptr::null(), 1, 0.0, &mut sym), PdflowStatus::NullPointer);
        assert!(last_error().contains("src"));
        let empty = CString::new("").unwrap();
        let mut cfg = ptr::null_mut();
        assert_eq!(pdflow_config_validate(empty.as_ptr(), ptr::null(), &mut cfg), PdflowStatus::Config);
        assert!(last_error().contains("kind missing"));
        pdflow_symbol_free(ptr::null_mut());
        pdflow_config_free(ptr::null_mut());
        pdflow_report_free(ptr::null_mut());
        pdflow_string_free(ptr::null_mut());
        assert_eq!(pdflow_report_pass(ptr::null()), 0);
    }
}

#[test]
fn run_compose_config() {
    let text = CString::new("kind = compose\nsymbol = [[xi1*bracket(-1), 1], [0, 2]]\neps = 2^-3, 2^-4, 2^-5\n\n[compose]\nsymbol2 = [[1, bracket(-2)], [xi1, 0]]\nweyl_nx = 32\n").unwrap();
    let mut cfg = ptr::null_mut();
    let mut rep = ptr::null_mut();
    unsafe {
        assert_eq!(pdflow_config_validate(text.as_ptr(), ptr::null(), &mut cfg), PdflowStatus::Ok, "{}", last_error());
        let echo = pdflow_config_echo(cfg);
        assert!(CStr::from_ptr(echo).to_str().unwrap().contains("kind = compose"));
        pdflow_string_free(echo);
        assert_eq!(pdflow_run(cfg, 1, &mut rep), PdflowStatus::Ok, "{}", last_error());
        assert_eq!(pdflow_report_pass(rep), 1);
        let json = pdflow_report_json(rep);
        let s = CStr::from_ptr(json).to_str().unwrap().to_owned();
        pdflow_string_free(json);
        assert!(s.contains("\"kind\": \"compose\""), "{s}");
        let dir = std::env::temp_dir().join(format!("pdflow-ffi-{}", std::process::id()));
        let cdir = CString::new(dir.to_str().unwrap()).unwrap();
        assert_eq!(pdflow_report_write(rep, cdir.as_ptr()), PdflowStatus::Ok);
        assert!(dir.join("report.json").exists() && dir.join("timings.json").exists());
        std::fs::remove_dir_all(&dir).unwrap();
        pdflow_report_free(rep);
        pdflow_config_free(cfg);
    }
}

#[test]
fn header_declares_every_export() {
    let h = include_str!("../include/pdflow.h");
    for f in [
        "pdflow_last_error",
        "pdflow_version",
        "pdflow_string_free",
        "pdflow_symbol_parse",
        "pdflow_symbol_eval",
        "pdflow_symbol_rates",
        "pdflow_config_validate",
        "pdflow_config_echo",
        "pdflow_run",
        "pdflow_report_json",
        "pdflow_report_write",
        "typedef struct PdflowSymbol PdflowSymbol",
        "PDFLOW_STATUS_PANIC = 10",
    ] {
        assert!(h.contains(f), "{f}");
    }
    assert_eq!(unsafe { CStr::from_ptr(pdflow_version()) }.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
