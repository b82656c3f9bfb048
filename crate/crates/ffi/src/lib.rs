//! C ABI over `lorentzkit`.
//!
//! Fields are opaque `LkField` handles created by `lk_field_*` constructors
//! and released with `lk_field_free`. Every fallible call returns an
//! `LkStatus`; on failure `lk_last_error` describes the problem. Results
//! are written through out-pointers, which are left untouched on failure.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lorentzkit::cli::{run_verify, Flags, RunConfig, EXIT_FAILED, EXIT_INADMISSIBLE, EXIT_OK};
use lorentzkit::nse::{self, VelocityField};
use lorentzkit::spaces::{besov_lorentz_norm, triebel_lorentz_norm, SpaceParams};
use lorentzkit::spectral::fractional_laplacian;
use lorentzkit::{lp_norm, Error, Grid, ProfileSpec, SampledField, Variant};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// An index or exponent outside the domain of the quantity.
    Domain = 3,
    Inadmissible = 4,
    UnknownCase = 5,
    /// A verification ran but its verdict was not the expected one.
    Failed = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Opaque sampled field.
pub struct LkField {
    inner: SampledField,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> LkStatus {
    match e {
        Error::Domain(_) | Error::Support { .. } | Error::Relation(_) => LkStatus::Domain,
        Error::Inadmissible(_) => LkStatus::Inadmissible,
        Error::UnknownCase(_) => LkStatus::UnknownCase,
        _ => LkStatus::InvalidArgument,
    }
}

struct Fail(LkStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

type Res<T> = std::result::Result<T, Fail>;

fn guard(f: impl FnOnce() -> Res<()>) -> LkStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LkStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LkStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, name: &str) -> Res<&'a T> {
    // SAFETY: the caller promises `p` is null or valid for the call.
    unsafe { p.as_ref() }.ok_or_else(|| Fail(LkStatus::NullPointer, format!("{name} is null")))
}

fn out_ptr<T>(p: *mut T, name: &str) -> Res<*mut T> {
    if p.is_null() {
        Err(Fail(LkStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(p)
    }
}

fn write_out<T>(p: *mut T, v: T) {
    // SAFETY: checked non-null by `out_ptr`; the caller owns the storage.
    unsafe { p.write(v) }
}

fn c_str<'a>(p: *const c_char, name: &str) -> Res<&'a str> {
    if p.is_null() {
        return Err(Fail(LkStatus::NullPointer, format!("{name} is null")));
    }
    // SAFETY: non-null and NUL-terminated per the API contract.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Fail(LkStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

fn boxed(field: SampledField) -> *mut LkField {
    Box::into_raw(Box::new(LkField { inner: field }))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn lk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Creates a field from `components × points^dim` samples, component-major.
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lk_field_create(
    dim: usize,
    points: usize,
    length: f64,
    components: usize,
    values: *const f64,
    len: usize,
    out: *mut *mut LkField,
) -> LkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if values.is_null() {
            return Err(Fail(LkStatus::NullPointer, "values is null".into()));
        }
        let grid = Grid::new(dim, points, length)?;
        // SAFETY: caller guarantees `len` readable doubles.
        let data = unsafe { std::slice::from_raw_parts(values, len) }.to_vec();
        let field = SampledField::new(grid, components, data)?;
        write_out(out, boxed(field));
        Ok(())
    })
}

/// Samples an analytic profile given as JSON, e.g.
/// `{"family":"gaussian","params":{"width":2}}`.
///
/// # Safety
/// `profile_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lk_field_from_profile(
    profile_json: *const c_char,
    dim: usize,
    points: usize,
    length: f64,
    out: *mut *mut LkField,
) -> LkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let text = c_str(profile_json, "profile_json")?;
        let spec: ProfileSpec = serde_json::from_str(text).map_err(|e| Fail(LkStatus::InvalidArgument, e.to_string()))?;
        let grid = Grid::new(dim, points, length)?;
        write_out(out, boxed(spec.profile.sample(&grid)?));
        Ok(())
    })
}

/// Releases a field. Null is ignored.
///
/// # Safety
/// `field` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lk_field_free(field: *mut LkField) {
    if !field.is_null() {
        // SAFETY: allocated by `boxed` and released once.
        drop(unsafe { Box::from_raw(field) });
    }
}

/// Number of stored values (`components × points^dim`).
///
/// # Safety
/// `field` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lk_field_len(field: *const LkField, out: *mut usize) -> LkStatus {
    guard(|| {
        let f = non_null(field, "field")?;
        write_out(out_ptr(out, "out")?, f.inner.values().len());
        Ok(())
    })
}

/// Copies the samples into `buf`, which must hold `lk_field_len` doubles.
///
/// # Safety
/// `buf` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lk_field_values(field: *const LkField, buf: *mut f64, len: usize) -> LkStatus {
    guard(|| {
        let f = non_null(field, "field")?;
        let buf = out_ptr(buf, "buf")?;
        let v = f.inner.values();
        if len < v.len() {
            return Err(Fail(LkStatus::BufferTooSmall, format!("need {} values, buffer holds {len}", v.len())));
        }
        // SAFETY: `buf` holds at least `v.len()` doubles.
        unsafe { ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len()) };
        Ok(())
    })
}

fn norm_call(field: *const LkField, out: *mut f64, f: impl FnOnce(&SampledField) -> lorentzkit::Result<f64>) -> LkStatus {
    guard(|| {
        let fld = non_null(field, "field")?;
        let out = out_ptr(out, "out")?;
        write_out(out, f(&fld.inner)?);
        Ok(())
    })
}

/// `‖f‖_{L^{p,q}}`; `star != 0` selects the `f**` variant. Pass
/// `INFINITY` for `q = ∞`.
///
/// # Safety
/// `field` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lk_lorentz_norm(field: *const LkField, p: f64, q: f64, star: c_int, out: *mut f64) -> LkStatus {
    let variant = if star != 0 { Variant::Star } else { Variant::Plain };
    norm_call(field, out, |f| lorentzkit::rearrange::lorentz_norm(f, p, q, variant))
}

/// # Safety
/// `field` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lk_lp_norm(field: *const LkField, p: f64, out: *mut f64) -> LkStatus {
    norm_call(field, out, |f| lp_norm(f, p))
}

/// Homogeneous Besov-Lorentz norm `‖u‖_{Ḃ^s_{p,q,r}}`.
///
/// # Safety
/// `field` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lk_besov_norm(field: *const LkField, s: f64, p: f64, q: f64, r: f64, out: *mut f64) -> LkStatus {
    norm_call(field, out, |f| besov_lorentz_norm(f, SpaceParams::new(s, p, q, r)).map(|n| n.value))
}

/// Homogeneous Triebel-Lizorkin-Lorentz norm `‖u‖_{Ḟ^s_{p,q,r}}`.
///
/// # Safety
/// `field` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lk_triebel_norm(field: *const LkField, s: f64, p: f64, q: f64, r: f64, out: *mut f64) -> LkStatus {
    norm_call(field, out, |f| triebel_lorentz_norm(f, SpaceParams::new(s, p, q, r)).map(|n| n.value))
}

/// `Λ^s f` as a new handle.
///
/// # Safety
/// `field` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lk_fractional_laplacian(field: *const LkField, s: f64, out: *mut *mut LkField) -> LkStatus {
    guard(|| {
        let f = non_null(field, "field")?;
        let out = out_ptr(out, "out")?;
        write_out(out, boxed(fractional_laplacian(&f.inner, s)?));
        Ok(())
    })
}

/// Leray projection of a three-component field on a 3D grid.
///
/// # Safety
/// `field` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lk_leray_project(field: *const LkField, out: *mut *mut LkField) -> LkStatus {
    guard(|| {
        let f = non_null(field, "field")?;
        let out = out_ptr(out, "out")?;
        write_out(out, boxed(nse::leray_project(&f.inner)?.into_field()));
        Ok(())
    })
}

fn velocity(f: &LkField) -> Res<VelocityField> {
    Ok(VelocityField::new(f.inner.clone())?)
}

/// Energy flux `Π_Q` of a divergence-free field.
///
/// # Safety
/// `field` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lk_flux(field: *const LkField, q: c_int, out: *mut f64) -> LkStatus {
    guard(|| {
        let v = velocity(non_null(field, "field")?)?;
        write_out(out_ptr(out, "out")?, nse::flux(&v, q));
        Ok(())
    })
}

/// Dyadic bound on `|Π_Q|` from nonhomogeneous block `L³` norms.
///
/// # Safety
/// `field` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lk_dyadic_flux_bound(field: *const LkField, q: c_int, out: *mut f64) -> LkStatus {
    guard(|| {
        let v = velocity(non_null(field, "field")?)?;
        write_out(out_ptr(out, "out")?, nse::dyadic_flux_bound(&v, q));
        Ok(())
    })
}

/// Runs a registered verification case and returns its JSON-lines report
/// body in `*out_json`, to be released with `lk_string_free`. The report is
/// produced also when the status is `Failed` or `Inadmissible`.
///
/// # Safety
/// `case_id` must be a NUL-terminated string; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lk_verify_json(case_id: *const c_char, seed: u64, out_json: *mut *mut c_char) -> LkStatus {
    let mut verdict = LkStatus::Ok;
    let status = guard(|| {
        let out = out_ptr(out_json, "out_json")?;
        let id = c_str(case_id, "case_id")?;
        let flags = Flags {
            cases: vec![id.to_string()],
            seed: Some(seed),
            ..Flags::default()
        };
        let cfg = RunConfig::from_flags(&flags)?;
        let output = run_verify(&cfg).map_err(|f| Fail(LkStatus::InvalidArgument, f.message))?;
        let mut text = String::new();
        for r in &output.records {
            text.push_str(&r.to_string());
            text.push('\n');
        }
        verdict = match output.code {
            EXIT_OK => LkStatus::Ok,
            EXIT_INADMISSIBLE => LkStatus::Inadmissible,
            EXIT_FAILED => LkStatus::Failed,
            _ => LkStatus::InvalidArgument,
        };
        let c = CString::new(text).map_err(|e| Fail(LkStatus::InvalidArgument, e.to_string()))?;
        write_out(out, c.into_raw());
        if verdict != LkStatus::Ok {
            set_error(output.notes.join("; "));
        }
        Ok(())
    });
    if status == LkStatus::Ok {
        verdict
    } else {
        status
    }
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lk_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: produced by `CString::into_raw` in this crate.
        drop(unsafe { CString::from_raw(s) });
    }
}
