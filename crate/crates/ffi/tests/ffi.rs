use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use lorentzkit::nse;
use lorentzkit::{AnalyticProfile, Grid, Variant};
use lorentzkit_ffi::*;

fn last_error() -> String {
    let p = lk_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn from_profile(json: &str, dim: usize, points: usize, length: f64) -> *mut LkField {
    let s = CString::new(json).unwrap();
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { lk_field_from_profile(s.as_ptr(), dim, points, length, &mut f) }, LkStatus::Ok);
    f
}

#[test]
fn create_copy_and_free() {
    let values: Vec<f64> = (0..64).map(|i| i as f64).collect();
    let mut f = ptr::null_mut();
    let st = unsafe { lk_field_create(2, 8, 1.0, 1, values.as_ptr(), values.len(), &mut f) };
    assert_eq!(st, LkStatus::Ok);
    let mut len = 0;
    assert_eq!(unsafe { lk_field_len(f, &mut len) }, LkStatus::Ok);
    assert_eq!(len, 64);
    let mut back = vec![0.0; 64];
    assert_eq!(unsafe { lk_field_values(f, back.as_mut_ptr(), back.len()) }, LkStatus::Ok);
    assert_eq!(back, values);
    let mut small = vec![0.0; 3];
    assert_eq!(unsafe { lk_field_values(f, small.as_mut_ptr(), 3) }, LkStatus::BufferTooSmall);
    unsafe { lk_field_free(f) };
    unsafe { lk_field_free(ptr::null_mut()) };
}

#[test]
fn shape_errors_are_reported() {
    let values = [1.0; 5];
    let mut f = ptr::null_mut();
    let st = unsafe { lk_field_create(2, 8, 1.0, 1, values.as_ptr(), values.len(), &mut f) };
    assert_eq!(st, LkStatus::InvalidArgument);
    assert!(f.is_null());
    assert!(!last_error().is_empty());
    let st = unsafe { lk_field_create(2, 8, 1.0, 1, ptr::null(), 64, &mut f) };
    assert_eq!(st, LkStatus::NullPointer);
    let bad = CString::new("{\"family\":\"nope\"}").unwrap();
    assert_eq!(unsafe { lk_field_from_profile(bad.as_ptr(), 1, 8, 1.0, &mut f) }, LkStatus::InvalidArgument);
}

#[test]
fn norms_match_the_library() {
    let json = r#"{"family":"gaussian","params":{"width":3}}"#;
    let f = from_profile(json, 2, 64, 32.0);
    let u = AnalyticProfile::Gaussian { width: 3.0, amplitude: 1.0 }
        .sample(&Grid::new(2, 64, 32.0).unwrap())
        .unwrap();
    let mut v = 0.0;
    assert_eq!(unsafe { lk_lorentz_norm(f, 3.0, f64::INFINITY, 1, &mut v) }, LkStatus::Ok);
    assert_eq!(v, lorentzkit::rearrange::lorentz_norm(&u, 3.0, f64::INFINITY, Variant::Star).unwrap());
    assert_eq!(unsafe { lk_lp_norm(f, 2.0, &mut v) }, LkStatus::Ok);
    assert_eq!(v, lorentzkit::lp_norm(&u, 2.0).unwrap());
    let (mut b, mut t) = (0.0, 0.0);
    assert_eq!(unsafe { lk_besov_norm(f, 0.5, 2.0, 2.0, 2.0, &mut b) }, LkStatus::Ok);
    assert_eq!(unsafe { lk_triebel_norm(f, 0.5, 2.0, 2.0, 2.0, &mut t) }, LkStatus::Ok);
    // Both reduce to the same square function norm when every index is 2.
    assert!((b / t - 1.0).abs() < 1e-12, "{b} {t}");
    unsafe { lk_field_free(f) };
}

#[test]
fn domain_errors_leave_outputs_alone() {
    let f = from_profile(r#"{"family":"zero"}"#, 1, 8, 1.0);
    let mut v = -7.0;
    assert_eq!(unsafe { lk_lorentz_norm(f, 0.0, 1.0, 0, &mut v) }, LkStatus::Domain);
    assert_eq!(v, -7.0);
    assert!(last_error().contains('p'));
    assert_eq!(unsafe { lk_lp_norm(f, 2.0, &mut v) }, LkStatus::Ok);
    assert!(lk_last_error().is_null());
    assert_eq!(unsafe { lk_lp_norm(f, 2.0, ptr::null_mut()) }, LkStatus::NullPointer);
    assert_eq!(unsafe { lk_lp_norm(ptr::null(), 2.0, &mut v) }, LkStatus::NullPointer);
    unsafe { lk_field_free(f) };
}

#[test]
fn fractional_laplacian_of_a_mode() {
    let f = from_profile(r#"{"family":"pure_mode","params":{"wavevector":[3,0]}}"#, 2, 32, 2.0 * std::f64::consts::PI);
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { lk_fractional_laplacian(f, 2.0, &mut g) }, LkStatus::Ok);
    let (mut a, mut b) = (0.0, 0.0);
    unsafe {
        lk_lp_norm(f, 2.0, &mut a);
        lk_lp_norm(g, 2.0, &mut b);
        lk_field_free(f);
        lk_field_free(g);
    }
    assert!((b / a - 9.0).abs() < 1e-10);
}

#[test]
fn flux_requires_a_solenoidal_field() {
    let grid = Grid::new(3, 16, 2.0 * std::f64::consts::PI).unwrap();
    let v = nse::random_solenoidal(&grid, [1.0, 4.0], 2).unwrap();
    let vals = v.field().values();
    let mut f = ptr::null_mut();
    unsafe { lk_field_create(3, 16, grid.length, 3, vals.as_ptr(), vals.len(), &mut f) };
    let (mut pi, mut bound) = (0.0, 0.0);
    assert_eq!(unsafe { lk_flux(f, 1, &mut pi) }, LkStatus::Ok);
    assert_eq!(pi, nse::flux(&v, 1));
    assert_eq!(unsafe { lk_dyadic_flux_bound(f, 1, &mut bound) }, LkStatus::Ok);
    assert!(bound > 0.0);

    let noisy: Vec<f64> = (0..vals.len()).map(|i| ((i * 7919) % 13) as f64).collect();
    let mut w = ptr::null_mut();
    unsafe { lk_field_create(3, 16, grid.length, 3, noisy.as_ptr(), noisy.len(), &mut w) };
    assert_eq!(unsafe { lk_flux(w, 1, &mut pi) }, LkStatus::Domain);
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { lk_leray_project(w, &mut p) }, LkStatus::Ok);
    assert_eq!(unsafe { lk_flux(p, 1, &mut pi) }, LkStatus::Ok);
    unsafe {
        lk_field_free(f);
        lk_field_free(w);
        lk_field_free(p);
    }
}

fn verify(id: &str) -> (LkStatus, Option<String>) {
    let c = CString::new(id).unwrap();
    let mut out = ptr::null_mut();
    let st = unsafe { lk_verify_json(c.as_ptr(), 11, &mut out) };
    let text = (!out.is_null()).then(|| {
        let s = unsafe { CStr::from_ptr(out) }.to_string_lossy().into_owned();
        unsafe { lk_string_free(out) };
        s
    });
    (st, text)
}

#[test]
fn verify_returns_json_lines() {
    let (st, text) = verify("CE-excluded-line");
    assert_eq!(st, LkStatus::Ok);
    let text = text.unwrap();
    let rows: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let case = rows.iter().find(|r| r["type"] == "case").unwrap();
    assert_eq!(case["verdict"], "diverging");
    assert_eq!(rows.last().unwrap()["type"], "summary");

    let (st, text) = verify("NO-SUCH-CASE");
    assert_eq!(st, LkStatus::UnknownCase);
    assert!(text.is_none());
    assert!(last_error().contains("NO-SUCH-CASE"));
}

#[test]
fn header_compiles_and_links_from_c() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // The test binary lives in target/<profile>/deps; the static library one level up.
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().unwrap().parent().unwrap().to_path_buf();
    let lib = lib_dir.join("liblorentzkit_ffi.a");
    assert!(lib.exists(), "missing {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("a C compiler is available");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!((v / (4.0 * std::f64::consts::PI / 3.0).sqrt() - 1.0).abs() < 0.02, "{v}");
}
