//! Exercises the C ABI from Rust and, when a C compiler is available, from a
//! small C program linked against the static library.

use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use rabi_zeta_ffi::*;

fn c(re: f64) -> RzComplex {
    RzComplex { re, im: 0.0 }
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(rz_last_error_message()) }.to_string_lossy().into_owned()
}

#[test]
fn uncoupled_zeta_value() {
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(rz_model_one_photon(0.0, 0.0, 0.0, &mut model), RzStatus::Ok);
        let mut res = ptr::null_mut();
        assert_eq!(rz_zeta_value(model, 2, c(1.0), RzMethod::Default, 0, 0.0, 0, &mut res), RzStatus::Ok);
        let mut v = RzValue { value: c(0.0), abs_error: 0.0 };
        assert_eq!(rz_zeta_result_value(res, &mut v), RzStatus::Ok);
        assert!((v.value.re - std::f64::consts::PI.powi(2) / 3.0).abs() < 1e-14);
        assert_eq!(rz_zeta_result_num_terms(res), 0);
        rz_zeta_result_free(res);
        rz_model_free(model);
    }
}

#[test]
fn value_is_base_plus_terms() {
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(rz_model_two_photon(0.2, 0.3, 0.1, &mut model), RzStatus::Ok);
        let mut res = ptr::null_mut();
        let st = rz_zeta_value(model, 2, c(1.0), RzMethod::SeriesOperator, 0, 0.0, 200, &mut res);
        assert_eq!(st, RzStatus::Ok, "{}", last_error());
        let mut total = c(0.0);
        assert_eq!(rz_zeta_result_base_term(res, &mut total), RzStatus::Ok);
        for i in 0..rz_zeta_result_num_terms(res) {
            let mut t = c(0.0);
            assert_eq!(rz_zeta_result_term(res, i, &mut t), RzStatus::Ok);
            total.re += t.re;
            total.im += t.im;
        }
        let mut v = RzValue { value: c(0.0), abs_error: 0.0 };
        rz_zeta_result_value(res, &mut v);
        assert!((total.re - v.value.re).abs() < 1e-15);
        let mut t = c(0.0);
        assert_eq!(rz_zeta_result_term(res, 999, &mut t), RzStatus::InvalidArgument);
        rz_zeta_result_free(res);
        rz_model_free(model);
    }
}

#[test]
fn error_codes_and_messages() {
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(rz_model_ncho(0.5, 1.0, 0.0, &mut model), RzStatus::Domain);
        assert!(model.is_null());
        assert!(last_error().contains("NCHO"));
        assert_eq!(rz_model_one_photon(0.1, 2.0, 0.0, &mut model), RzStatus::Ok);
        let mut res = ptr::null_mut();
        assert_eq!(rz_zeta_value(model, 2, c(1.0), RzMethod::Default, 0, 0.0, 0, &mut res), RzStatus::RadiusExceeded);
        assert_eq!(rz_zeta_value(model, 2, c(-1.0), RzMethod::Default, 0, 0.0, 0, &mut res), RzStatus::Pole);
        assert_eq!(rz_zeta_value(ptr::null(), 2, c(1.0), RzMethod::Default, 0, 0.0, 0, &mut res), RzStatus::NullPointer);
        let mut r = 0.0;
        assert_eq!(rz_convergence_radius(model, c(0.6), &mut r), RzStatus::Ok);
        assert!((r - 0.6).abs() < 1e-15);
        rz_model_free(model);
        rz_model_free(ptr::null_mut());
    }
}

#[test]
fn apery_table_and_beukers() {
    unsafe {
        let mut table = ptr::null_mut();
        assert_eq!(rz_apery_classic(3, &mut table), RzStatus::Ok);
        assert_eq!(rz_apery_table_len(table), 4);
        let read = |which, n| {
            let mut s = ptr::null_mut();
            assert_eq!(rz_apery_table_entry(table, which, n, &mut s), RzStatus::Ok);
            let out = CStr::from_ptr(s).to_str().unwrap().to_owned();
            rz_string_free(s);
            out
        };
        assert_eq!(read(0, 3), "147");
        assert_eq!(read(1, 1), "5");
        assert_eq!(read(1, 2), "125/4");
        let mut s = ptr::null_mut();
        assert_eq!(rz_apery_table_entry(table, 2, 0, &mut s), RzStatus::InvalidArgument);
        rz_apery_table_free(table);
        let mut r = 1.0;
        assert_eq!(rz_beukers_residual(4, &mut r), RzStatus::Ok);
        assert!(r < 1e-9);
    }
}

#[test]
fn trace_term_routes_agree() {
    unsafe {
        let mut op = RzValue { value: c(0.0), abs_error: 0.0 };
        let mut int = op;
        let eps = c(0.1);
        assert_eq!(rz_trace_term(RzFamily::Plus, 0.0, c(1.2), 0.3, eps, 1, 0, RzTraceMethod::Operator, 800, 0, &mut op), RzStatus::Ok);
        assert_eq!(rz_trace_term(RzFamily::Plus, 0.0, c(1.2), 0.3, eps, 1, 0, RzTraceMethod::Integral, 0, 6, &mut int), RzStatus::Ok);
        assert!((op.value.re - int.value.re).abs() < 1e-7);
    }
}

fn header_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include").join("rabi_zeta.h")
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(header_path()).expect("build script writes the header");
    for name in [
        "RZ_STATUS_OK",
        "RZ_STATUS_RADIUS_EXCEEDED",
        "typedef struct RzModel RzModel",
        "rz_model_one_photon",
        "rz_zeta_value",
        "rz_zeta_result_free",
        "rz_apery_table_entry",
        "rz_last_error_message",
    ] {
        assert!(h.contains(name), "header lacks {name}");
    }
}

/// Compiles and runs a C program against the static library.
#[test]
fn c_program_links_and_runs() {
    let Some(profile_dir) = std::env::current_exe().ok().and_then(|p| p.parent()?.parent().map(PathBuf::from)) else {
        return;
    };
    let lib = profile_dir.join("librabi_zeta_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping C link test: static library or C compiler unavailable");
        return;
    }
    let dir = std::env::temp_dir().join(format!("rabi_zeta_ffi_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <math.h>
#include <stdio.h>
#include "rabi_zeta.h"
int main(void) {
    RzModel *model = NULL;
    if (rz_model_one_photon(0.0, 0.0, 0.0, &model) != RZ_STATUS_OK) return 1;
    RzZetaResult *res = NULL;
    RzComplex lambda = {1.0, 0.0};
    if (rz_zeta_value(model, 2, lambda, RZ_METHOD_DEFAULT, 0, 0.0, 0, &res) != RZ_STATUS_OK) return 2;
    RzValue v;
    rz_zeta_result_value(res, &v);
    printf("%.17g\n", v.value.re);
    rz_zeta_result_free(res);
    RzModel *bad = NULL;
    if (rz_model_ncho(0.5, 1.0, 0.0, &bad) != RZ_STATUS_DOMAIN) return 3;
    rz_model_free(model);
    return fabs(v.value.re - 3.289868133696453) < 1e-14 ? 0 : 4;
}
"#,
    )
    .unwrap();
    let exe = dir.join("smoke");
    let include = header_path().parent().unwrap().to_path_buf();
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status.code());
    let printed = String::from_utf8(out.stdout).unwrap();
    assert!(printed.starts_with("3.28986813369645"), "{printed}");
    let _ = std::fs::remove_dir_all(&dir);
}
