use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use sardlab_ffi::*;

fn last_error() -> String {
    let p = sardlab_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn group(name: &str) -> *mut SardlabGroup {
    let name = CString::new(name).unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { sardlab_group_builtin(name.as_ptr(), &mut g) }, SardlabStatus::Ok);
    g
}

#[test]
fn group_queries() {
    let g = group("engel");
    unsafe {
        assert_eq!((sardlab_group_dim(g), sardlab_group_rank(g), sardlab_group_step(g)), (4, 2, 3));
        let mut w = [0u32; 4];
        assert_eq!(sardlab_group_weights(g, w.as_mut_ptr(), 4), SardlabStatus::Ok);
        assert_eq!(w, [1, 1, 2, 3]);
        let x = [1.0, 2.0, 3.0, 4.0];
        let mut y = [0.0; 4];
        assert_eq!(sardlab_group_dilate(g, 2.0, x.as_ptr(), 4, y.as_mut_ptr(), 4), SardlabStatus::Ok);
        assert_eq!(y, [2.0, 4.0, 12.0, 32.0]);
        // the origin is the identity
        let zero = [0.0; 4];
        assert_eq!(sardlab_group_product(g, x.as_ptr(), zero.as_ptr(), 4, y.as_mut_ptr(), 4), SardlabStatus::Ok);
        assert_eq!(y, x);
        assert_eq!(sardlab_group_dim(ptr::null()), 0);
        sardlab_group_free(g);
        sardlab_group_free(ptr::null_mut());
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let bad = CString::new("nosuchgroup").unwrap();
        let mut g = ptr::null_mut();
        assert_eq!(sardlab_group_builtin(bad.as_ptr(), &mut g), SardlabStatus::InvalidArgument);
        assert!(g.is_null());
        assert!(last_error().contains("nosuchgroup"), "{}", last_error());

        let json = CString::new("{\n  \"rank\": 2,\n  \"strata_dims\": [2, 1\n}").unwrap();
        assert_eq!(sardlab_group_from_json(json.as_ptr(), &mut g), SardlabStatus::Parse);
        assert!(last_error().contains("line"), "{}", last_error());

        assert_eq!(sardlab_group_builtin(ptr::null(), &mut g), SardlabStatus::NullPointer);
        sardlab_clear_error();
        assert!(sardlab_last_error_message().is_null());

        let h = group("heisenberg");
        let mut w = [0u32; 2];
        assert_eq!(sardlab_group_weights(h, w.as_mut_ptr(), 2), SardlabStatus::BufferTooSmall);
        assert!(last_error().contains("3 needed"));
        sardlab_group_free(h);
    }
}

#[test]
fn group_from_json_matches_builtin() {
    let json = CString::new(r#"{"name": "h", "rank": 2, "step": 2, "strata_dims": [2, 1], "brackets": [[1, 2, 3, "1"]]}"#).unwrap();
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(sardlab_group_from_json(json.as_ptr(), &mut g), SardlabStatus::Ok, "{}", last_error());
        assert_eq!(sardlab_group_dim(g), 3);
        sardlab_group_free(g);
    }
}

#[test]
fn endpoint_map_against_rk4() {
    let g = group("heisenberg");
    let basis = CString::new("poly_degree(2)").unwrap();
    let mut f = ptr::null_mut();
    unsafe {
        assert_eq!(sardlab_endpoint_build(g, basis.as_ptr(), &mut f), SardlabStatus::Ok, "{}", last_error());
        sardlab_group_free(g);
        let (n, m) = (sardlab_endpoint_nvars(f), sardlab_endpoint_ncomps(f));
        assert_eq!((n, m), (6, 3));
        let mut deg = [0u32; 3];
        assert_eq!(sardlab_endpoint_degrees(f, deg.as_mut_ptr(), 3), SardlabStatus::Ok);
        assert_eq!(deg, [1, 1, 2]);
        let s = [0.3, -0.2, 0.5, 0.1, 0.7, -0.4];
        let (mut exact, mut rk4) = ([0.0; 3], [0.0; 3]);
        assert_eq!(sardlab_endpoint_eval(f, s.as_ptr(), n, exact.as_mut_ptr(), 3), SardlabStatus::Ok);
        assert_eq!(sardlab_endpoint_integrate(f, s.as_ptr(), n, 2000, rk4.as_mut_ptr(), 3), SardlabStatus::Ok);
        for (a, b) in exact.iter().zip(&rk4) {
            assert!((a - b).abs() < 1e-10, "{exact:?} vs {rk4:?}");
        }
        // Jacobian against central differences
        let mut jac = [0.0; 18];
        assert_eq!(sardlab_endpoint_jacobian(f, s.as_ptr(), n, jac.as_mut_ptr(), 18), SardlabStatus::Ok);
        let h = 1e-6;
        for c in 0..n {
            let (mut sp, mut sm) = (s, s);
            sp[c] += h;
            sm[c] -= h;
            let (mut yp, mut ym) = ([0.0; 3], [0.0; 3]);
            sardlab_endpoint_eval(f, sp.as_ptr(), n, yp.as_mut_ptr(), 3);
            sardlab_endpoint_eval(f, sm.as_ptr(), n, ym.as_mut_ptr(), 3);
            for r in 0..m {
                assert!((jac[r * n + c] - (yp[r] - ym[r]) / (2.0 * h)).abs() < 1e-6);
            }
        }
        assert_eq!(sardlab_endpoint_eval(f, s.as_ptr(), 5, exact.as_mut_ptr(), 3), SardlabStatus::InvalidArgument);
        sardlab_endpoint_free(f);
    }
}

#[test]
fn certificate_reaches_targets() {
    let g = group("heisenberg");
    let mut c = ptr::null_mut();
    unsafe {
        assert_eq!(sardlab_certificate_build(g, 2, 1, &mut c), SardlabStatus::Ok, "{}", last_error());
        let (mut sigma, mut degree, mut ball) = (0.0, 0usize, 0.0);
        assert_eq!(sardlab_certificate_info(c, &mut sigma, &mut degree, &mut ball), SardlabStatus::Ok);
        assert!(sigma > 0.0 && ball > 0.0 && degree <= 2);
        let target = [0.4, -0.3, 0.25];
        let (mut lambda, mut residual) = (0.0, 1.0);
        let mut coords = [0.0; 3];
        let st = sardlab_certificate_reach(c, target.as_ptr(), 3, &mut lambda, &mut residual, coords.as_mut_ptr(), 3);
        assert_eq!(st, SardlabStatus::Ok, "{}", last_error());
        assert!(residual <= 1e-8);
        let mut json = ptr::null_mut();
        assert_eq!(sardlab_certificate_to_json(c, &mut json), SardlabStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        sardlab_string_free(json);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["sigma"].as_f64(), Some(sigma));
        sardlab_certificate_free(c);
        sardlab_group_free(g);
    }
}

#[test]
fn one_shot_numerics() {
    let m = [3.0, 0.0, 0.0, 0.0, 4.0, 0.0];
    let mut s = [0.0; 2];
    unsafe {
        assert_eq!(sardlab_singular_values(m.as_ptr(), 2, 3, s.as_mut_ptr(), 2), SardlabStatus::Ok);
    }
    assert_eq!(s, [4.0, 3.0]);

    let pts: Vec<f64> = (0..4000).map(|k| k as f64 / 3999.0).collect();
    let eps: Vec<f64> = (0..6).map(|k| 0.1 * 0.5f64.powi(k)).collect();
    let (mut dim, mut hw) = (0.0, 0.0);
    unsafe {
        assert_eq!(sardlab_entropy_dimension(pts.as_ptr(), pts.len(), 1, eps.as_ptr(), eps.len(), &mut dim, &mut hw), SardlabStatus::Ok);
    }
    assert!((dim - 1.0).abs() < 0.05, "{dim}");
}

#[test]
fn run_experiment_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = CString::new(format!(r#"{{"out": {:?}, "controls": 5}}"#, tmp.path().display().to_string())).unwrap();
    let name = CString::new("endpoint-poly").unwrap();
    let mut code = -1;
    unsafe {
        assert_eq!(sardlab_run_experiment(name.as_ptr(), cfg.as_ptr(), &mut code), SardlabStatus::Ok, "{}", last_error());
    }
    assert_eq!(code, 0);
    assert!(tmp.path().join("manifest.json").exists());
    let bad = CString::new(r#"{"radious": 1}"#).unwrap();
    unsafe {
        assert_eq!(sardlab_run_experiment(name.as_ptr(), bad.as_ptr(), &mut code), SardlabStatus::Parse);
    }
    assert!(last_error().contains("radious"));
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(sardlab_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_header() {
    let lib_dir = target_dir();
    if !lib_dir.join("libsardlab_ffi.so").exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: shared library or C compiler unavailable");
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "sardlab.h"

int main(void) {
    SardlabGroup *g = NULL;
    if (sardlab_group_builtin("heisenberg", &g) != SARDLAB_STATUS_OK) return 1;
    SardlabEndpointMap *f = NULL;
    if (sardlab_endpoint_build(g, "poly_degree(1)", &f) != SARDLAB_STATUS_OK) return 2;
    double s[4] = {1.0, 0.0, 0.0, 1.0}, y[3];
    if (sardlab_endpoint_eval(f, s, 4, y, 3) != SARDLAB_STATUS_OK) return 3;
    printf("%.6f %.6f %.6f\n", y[0], y[1], y[2]);
    if (sardlab_group_builtin("bogus", &g) == SARDLAB_STATUS_OK) return 4;
    if (sardlab_last_error_message() == NULL) return 5;
    sardlab_endpoint_free(f);
    sardlab_group_free(g);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = tmp.path().join("smoke");
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg("-L")
        .arg(&lib_dir)
        .arg("-lsardlab_ffi")
        .arg("-o")
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).env("LD_LIBRARY_PATH", &lib_dir).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let vals: Vec<f64> = String::from_utf8_lossy(&out.stdout).split_whitespace().map(|v| v.parse().unwrap()).collect();
    assert_eq!(vals.len(), 3);
    // u = (1, t): endpoint (1, 1/2, ·) in exponential coordinates
    assert!((vals[0] - 1.0).abs() < 1e-12 && (vals[1] - 0.5).abs() < 1e-12);
}
