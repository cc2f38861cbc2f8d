use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use crafem_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe { crafem_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn new_problem(name: &str) -> *mut CrafemProblem {
    let name = CString::new(name).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { crafem_problem_new(name.as_ptr(), &mut p) }, CrafemStatus::Ok);
    p
}

#[test]
fn solve_the_square_through_handles() {
    unsafe {
        let p = new_problem("square-poisson-f1");
        let mut m = ptr::null_mut();
        assert_eq!(crafem_problem_mesh(p, 0, &mut m), CrafemStatus::Ok);
        let (mut ne, mut ns) = (0, 0);
        assert_eq!(crafem_mesh_counts(m, &mut ne, &mut ns), CrafemStatus::Ok);
        assert_eq!((ne, ns), (2, 5));
        let mut s = ptr::null_mut();
        assert_eq!(crafem_solve(p, m, &mut s), CrafemStatus::Ok);
        let mut found = false;
        for side in 0..ns {
            let mut xy = [0.0; 2];
            assert_eq!(crafem_mesh_side_midpoint(m, side, xy.as_mut_ptr()), CrafemStatus::Ok);
            if xy == [0.5, 0.5] {
                let mut v = 0.0;
                assert_eq!(crafem_solution_side_value(s, side, 0, &mut v), CrafemStatus::Ok);
                assert!((v - 1.0 / 24.0).abs() < 1e-15);
                found = true;
            }
        }
        assert!(found);
        let mut needed = 0;
        assert_eq!(crafem_solution_coefficients(s, ptr::null_mut(), 0, &mut needed), CrafemStatus::OutOfRange);
        assert_eq!(needed, 5);
        let mut buf = vec![0.0; needed];
        assert_eq!(crafem_solution_coefficients(s, buf.as_mut_ptr(), buf.len(), &mut needed), CrafemStatus::Ok);
        assert!((buf.iter().sum::<f64>() - 1.0 / 24.0).abs() < 1e-15);
        let mut g = 0.0;
        assert_eq!(crafem_solution_energy(s, 0.5, &mut g), CrafemStatus::Ok);
        // ∫u = ‖∇u‖² = 1/72, so G = −(1/144 − 1/72) + ½·(2·¼)
        assert!((g - (1.0 / 144.0 + 0.25)).abs() < 1e-15, "{g}");
        crafem_solution_free(s);
        crafem_mesh_free(m);
        crafem_problem_free(p);
    }
}

#[test]
fn adaptive_run_rows() {
    unsafe {
        let p = new_problem("lshape-poisson-f1");
        let params = CrafemAfemParams { mu: 0.5, gamma: 0.5, max_elems: 2000, max_iters: 0, tol: 0.0 };
        let mut r = ptr::null_mut();
        assert_eq!(crafem_afem_run(p, ptr::null(), &params, &mut r), CrafemStatus::Ok);
        let mut n = 0;
        assert_eq!(crafem_afem_num_rows(r, &mut n), CrafemStatus::Ok);
        assert!(n > 2);
        let mut prev = f64::INFINITY;
        for i in 0..n {
            let mut row = CrafemAfemRow::default();
            assert_eq!(crafem_afem_row(r, i, &mut row), CrafemStatus::Ok);
            assert_eq!(row.iter, i);
            assert!(row.energy <= prev);
            assert!(row.err_ref.is_nan());
            prev = row.energy;
        }
        let mut row = CrafemAfemRow::default();
        assert_eq!(crafem_afem_row(r, n, &mut row), CrafemStatus::OutOfRange);
        let mut m = ptr::null_mut();
        assert_eq!(crafem_afem_last_mesh(r, &mut m), CrafemStatus::Ok);
        crafem_mesh_free(m);
        crafem_afem_free(r);
        crafem_problem_free(p);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut p = ptr::null_mut();
        let bad = CString::new("no-such-problem").unwrap();
        assert_eq!(crafem_problem_new(bad.as_ptr(), &mut p), CrafemStatus::UnknownProblem);
        assert!(p.is_null());
        assert!(last_error().contains("no-such-problem"));
        assert_eq!(crafem_problem_new(ptr::null(), &mut p), CrafemStatus::NullPointer);

        let text = CString::new("vertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 7\n").unwrap();
        let mut m = ptr::null_mut();
        assert_eq!(crafem_mesh_parse(text.as_ptr(), &mut m), CrafemStatus::MeshError);
        assert!(!last_error().is_empty());

        let p = new_problem("square-poisson-f1");
        let params = CrafemAfemParams { mu: 2.0, gamma: 0.5, max_elems: 100, max_iters: 0, tol: 0.0 };
        let mut r = ptr::null_mut();
        assert_eq!(crafem_afem_run(p, ptr::null(), &params, &mut r), CrafemStatus::InvalidArgument);
        let mut comps = 0;
        assert_eq!(crafem_problem_components(p, &mut comps), CrafemStatus::Ok);
        assert_eq!(comps, 1);
        assert_eq!(last_error(), "");
        assert_eq!(crafem_problem_components(p, ptr::null_mut()), CrafemStatus::NullPointer);
        crafem_problem_free(p);
        crafem_problem_free(ptr::null_mut());
        // the full length is reported even when the buffer is short
        let mut tiny = [0 as c_char; 4];
        let full = crafem_last_error_message(tiny.as_mut_ptr(), tiny.len());
        assert!(full > 3 && tiny[3] == 0);
    }
}

#[test]
fn parsed_mesh_refines() {
    unsafe {
        let text = CString::new("vertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2\n").unwrap();
        let mut m = ptr::null_mut();
        assert_eq!(crafem_mesh_parse(text.as_ptr(), &mut m), CrafemStatus::Ok);
        let mut fine = ptr::null_mut();
        assert_eq!(crafem_mesh_refine_uniform(m, 2, &mut fine), CrafemStatus::Ok);
        let mut ne = 0;
        assert_eq!(crafem_mesh_counts(fine, &mut ne, ptr::null_mut()), CrafemStatus::Ok);
        assert_eq!(ne, 16);
        crafem_mesh_free(fine);
        crafem_mesh_free(m);
        let v = CStr::from_ptr(crafem_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <math.h>
#include "crafem.h"

int main(void) {
    CrafemProblem *p = NULL;
    CrafemMesh *m = NULL;
    CrafemSolution *s = NULL;
    if (crafem_problem_new("square-poisson-f1", &p) != CRAFEM_STATUS_OK) return 1;
    if (crafem_problem_mesh(p, 0, &m) != CRAFEM_STATUS_OK) return 2;
    if (crafem_solve(p, m, &s) != CRAFEM_STATUS_OK) return 3;
    double buf[5];
    uintptr_t needed = 0;
    if (crafem_solution_coefficients(s, buf, 5, &needed) != CRAFEM_STATUS_OK || needed != 5) return 4;
    double sum = 0.0;
    for (int i = 0; i < 5; i++) sum += buf[i];
    if (fabs(sum - 1.0 / 24.0) > 1e-15) return 5;
    CrafemProblem *q = NULL;
    if (crafem_problem_new("nope", &q) != CRAFEM_STATUS_UNKNOWN_PROBLEM) return 6;
    char msg[128];
    crafem_last_error_message(msg, sizeof msg);
    printf("%s\n", msg);
    crafem_solution_free(s);
    crafem_mesh_free(m);
    crafem_problem_free(p);
    return 0;
}
"#;

#[test]
fn header_compiles_and_links_from_c() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<this test> → target/<profile>
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libcrafem_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let src = tmp.join("ffi_roundtrip.c");
    let exe = tmp.join("ffi_roundtrip");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .expect("C compiler");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("unknown problem"));
}
