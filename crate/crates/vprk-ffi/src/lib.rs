//! C ABI for the vprk toolkit: opaque handles for fields and tableaux,
//! status codes for every fallible call, and JSON strings for structured
//! results. All pointers are borrowed unless a `_free` function exists for
//! them; strings returned through out-parameters must be released with
//! [`vprk_string_free`].
//!
//! Every entry point catches panics at the boundary and converts them to
//! `VPRK_STATUS_INTERNAL_PANIC`; the last error message is kept in
//! thread-local storage and can be read with [`vprk_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use vprk::classify::{classify, ClassifyConfig};
use vprk::error::Error;
use vprk::experiments::{emit_csv, run_named, ConfigOverrides};
use vprk::fields::{FieldDescriptor, QuadraticFieldSpec, VectorField};
use vprk::integrator::{kahan_step, rk_step};
use vprk::jacobian::{kahan_det, rk_det};
use vprk::sampling;
use vprk::tableaux::{builtin_tableau, ButcherTableau};

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VprkStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    UnknownName = 4,
    BadParams = 5,
    NumericalError = 6,
    IoError = 7,
    InternalPanic = 8,
}

/// Experiment verdict, mirroring the report field.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VprkVerdict {
    Preserved = 0,
    Violated = 1,
    Inconclusive = 2,
}

/// Opaque vector-field handle.
pub struct VprkField {
    inner: Box<dyn VectorField>,
}

/// Opaque quadratic-field handle (required by the Kahan step).
pub struct VprkQuadField {
    inner: QuadraticFieldSpec,
}

/// Opaque Butcher tableau handle.
pub struct VprkTableau {
    inner: ButcherTableau,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> VprkStatus {
    match err {
        Error::UnknownTableau(_) | Error::UnknownField(_) | Error::UnknownExperiment(_) => {
            VprkStatus::UnknownName
        }
        Error::BadParams(_) | Error::BadConfig(_) => VprkStatus::BadParams,
        Error::Json(_) => VprkStatus::InvalidJson,
        Error::Io(_) => VprkStatus::IoError,
        _ => VprkStatus::NumericalError,
    }
}

fn fail(err: &Error) -> VprkStatus {
    set_error(&err.to_string());
    status_of(err)
}

fn guard<F: FnOnce() -> VprkStatus>(body: F) -> VprkStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic crossed the FFI boundary");
            VprkStatus::InternalPanic
        }
    }
}

/// Borrow a C string as UTF-8.
///
/// # Safety
/// `ptr` must be null or a valid NUL-terminated string.
unsafe fn utf8<'a>(ptr: *const c_char) -> Result<&'a str, VprkStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(VprkStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        VprkStatus::InvalidUtf8
    })
}

fn give_string(out: *mut *mut c_char, text: String) {
    if out.is_null() {
        return;
    }
    let c = CString::new(text.replace('\0', " ")).unwrap_or_default();
    unsafe { *out = c.into_raw() };
}

/// Message of the most recent error on this thread, valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn vprk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Release a string returned through an out-parameter.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vprk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn vprk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

// ---------------------------------------------------------------------------
// Fields
// ---------------------------------------------------------------------------

/// Build a catalog field from a JSON descriptor such as
/// `{"name":"example2","params":{"c":1.0}}`.
///
/// # Safety
/// `json` must be a valid NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vprk_field_from_json(
    json: *const c_char,
    out: *mut *mut VprkField,
) -> VprkStatus {
    guard(|| {
        if out.is_null() {
            set_error("null out-parameter");
            return VprkStatus::NullArgument;
        }
        let text = match utf8(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let descriptor: FieldDescriptor = match serde_json::from_str(text) {
            Ok(d) => d,
            Err(e) => {
                set_error(&e.to_string());
                return VprkStatus::InvalidJson;
            }
        };
        match descriptor.build() {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(VprkField { inner }));
                VprkStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Phase-space dimension of a field; 0 for a null handle.
#[no_mangle]
pub extern "C" fn vprk_field_dim(field: *const VprkField) -> usize {
    if field.is_null() {
        return 0;
    }
    unsafe { (*field).inner.dim() }
}

/// Evaluate f(x) into `out` (both of length `len == dim`).
///
/// # Safety
/// `x` and `out` must point to `len` readable/writable doubles.
#[no_mangle]
pub unsafe extern "C" fn vprk_field_eval(
    field: *const VprkField,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> VprkStatus {
    guard(|| {
        if field.is_null() || x.is_null() || out.is_null() {
            set_error("null argument");
            return VprkStatus::NullArgument;
        }
        let f = &(*field).inner;
        if f.dim() != len {
            set_error("state length does not match the field dimension");
            return VprkStatus::BadParams;
        }
        let state = std::slice::from_raw_parts(x, len);
        let value = f.eval(state);
        std::ptr::copy_nonoverlapping(value.as_ptr(), out, len);
        VprkStatus::Ok
    })
}

/// # Safety
/// `field` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vprk_field_free(field: *mut VprkField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Build a quadratic field handle from a JSON descriptor; only
/// `quad_hamiltonian`, `linear` and `quadratic` descriptors qualify.
///
/// # Safety
/// `json` must be a valid NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vprk_quad_field_from_json(
    json: *const c_char,
    out: *mut *mut VprkQuadField,
) -> VprkStatus {
    guard(|| {
        if out.is_null() {
            set_error("null out-parameter");
            return VprkStatus::NullArgument;
        }
        let text = match utf8(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let descriptor: FieldDescriptor = match serde_json::from_str(text) {
            Ok(d) => d,
            Err(e) => {
                set_error(&e.to_string());
                return VprkStatus::InvalidJson;
            }
        };
        match descriptor.build_quadratic() {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(VprkQuadField { inner }));
                VprkStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `field` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vprk_quad_field_free(field: *mut VprkQuadField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

// ---------------------------------------------------------------------------
// Tableaux
// ---------------------------------------------------------------------------

/// Look up a builtin tableau: midpoint, trapezoidal, gauss2 or gauss3.
///
/// # Safety
/// `name` must be a valid NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vprk_tableau_builtin(
    name: *const c_char,
    out: *mut *mut VprkTableau,
) -> VprkStatus {
    guard(|| {
        if out.is_null() {
            set_error("null out-parameter");
            return VprkStatus::NullArgument;
        }
        let text = match utf8(name) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match builtin_tableau(text) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(VprkTableau { inner }));
                VprkStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Parse a tableau from its JSON form `{"s":..,"A":[[..]],"b":[..]}`.
///
/// # Safety
/// `json` must be a valid NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vprk_tableau_from_json(
    json: *const c_char,
    out: *mut *mut VprkTableau,
) -> VprkStatus {
    guard(|| {
        if out.is_null() {
            set_error("null out-parameter");
            return VprkStatus::NullArgument;
        }
        let text = match utf8(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let value: serde_json::Value = match serde_json::from_str(text) {
            Ok(v) => v,
            Err(e) => {
                set_error(&e.to_string());
                return VprkStatus::InvalidJson;
            }
        };
        match ButcherTableau::from_json(&value) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(VprkTableau { inner }));
                VprkStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Stage count; 0 for a null handle.
#[no_mangle]
pub extern "C" fn vprk_tableau_stages(tableau: *const VprkTableau) -> usize {
    if tableau.is_null() {
        return 0;
    }
    unsafe { (*tableau).inner.stages() }
}

/// # Safety
/// `tableau` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vprk_tableau_free(tableau: *mut VprkTableau) {
    if !tableau.is_null() {
        drop(Box::from_raw(tableau));
    }
}

// ---------------------------------------------------------------------------
// Stepping
// ---------------------------------------------------------------------------

/// One implicit Runge-Kutta step. Writes the next state into `x_next` and,
/// when `det_out` is non-null, the step-map Jacobian determinant.
///
/// # Safety
/// `x` and `x_next` must point to `len` readable/writable doubles.
#[no_mangle]
pub unsafe extern "C" fn vprk_rk_step(
    field: *const VprkField,
    tableau: *const VprkTableau,
    h: f64,
    x: *const f64,
    len: usize,
    x_next: *mut f64,
    det_out: *mut f64,
) -> VprkStatus {
    guard(|| {
        if field.is_null() || tableau.is_null() || x.is_null() || x_next.is_null() {
            set_error("null argument");
            return VprkStatus::NullArgument;
        }
        let f = &(*field).inner;
        let t = &(*tableau).inner;
        if f.dim() != len {
            set_error("state length does not match the field dimension");
            return VprkStatus::BadParams;
        }
        let state = std::slice::from_raw_parts(x, len);
        match rk_step(f.as_ref(), t, h, state) {
            Ok(step) => {
                if !det_out.is_null() {
                    let lin = step.stage_lin.as_ref().expect("rk steps carry stages");
                    match rk_det(f.as_ref(), t, lin) {
                        Ok(report) => *det_out = report.det_phi,
                        Err(e) => return fail(&e),
                    }
                }
                std::ptr::copy_nonoverlapping(step.x_next.as_ptr(), x_next, len);
                VprkStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// One Kahan step on a quadratic field, with the optional exact
/// determinant of the step map.
///
/// # Safety
/// `x` and `x_next` must point to `len` readable/writable doubles.
#[no_mangle]
pub unsafe extern "C" fn vprk_kahan_step(
    field: *const VprkQuadField,
    h: f64,
    x: *const f64,
    len: usize,
    x_next: *mut f64,
    det_out: *mut f64,
) -> VprkStatus {
    guard(|| {
        if field.is_null() || x.is_null() || x_next.is_null() {
            set_error("null argument");
            return VprkStatus::NullArgument;
        }
        let spec = &(*field).inner;
        if spec.dim() != len {
            set_error("state length does not match the field dimension");
            return VprkStatus::BadParams;
        }
        let state = std::slice::from_raw_parts(x, len);
        match kahan_step(spec, h, state) {
            Ok(step) => {
                if !det_out.is_null() {
                    match kahan_det(spec, h, state, &step.x_next) {
                        Ok(det) => *det_out = det,
                        Err(e) => return fail(&e),
                    }
                }
                std::ptr::copy_nonoverlapping(step.x_next.as_ptr(), x_next, len);
                VprkStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

// ---------------------------------------------------------------------------
// Classification and experiments
// ---------------------------------------------------------------------------

/// Classify a field on `samples` seeded points and return the report as a
/// JSON string in `out_json` (release with [`vprk_string_free`]).
///
/// # Safety
/// `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vprk_classify(
    field: *const VprkField,
    samples: usize,
    seed: u64,
    out_json: *mut *mut c_char,
) -> VprkStatus {
    guard(|| {
        if field.is_null() || out_json.is_null() {
            set_error("null argument");
            return VprkStatus::NullArgument;
        }
        let f = &(*field).inner;
        let mut rng = sampling::rng_from_seed(seed);
        let points: Vec<Vec<f64>> = (0..samples.max(1))
            .map(|_| sampling::sample_box(&mut rng, f.dim(), 1.0))
            .collect();
        let config = ClassifyConfig {
            samples: points,
            h_grid: vec![0.1, 0.5, 1.0],
            k_max: None,
            p_candidates: vec![],
            seed,
        };
        match classify(f.as_ref(), &config) {
            Ok(report) => match serde_json::to_string(&report) {
                Ok(text) => {
                    give_string(out_json, text);
                    VprkStatus::Ok
                }
                Err(e) => {
                    set_error(&e.to_string());
                    VprkStatus::InvalidJson
                }
            },
            Err(e) => fail(&e),
        }
    })
}

/// Run a registry experiment. `overrides_json` and `csv_path` may be null;
/// when `out_report_json` is non-null it receives the full report (release
/// with [`vprk_string_free`]). `out_verdict` and `out_matches_expectation`
/// are optional out-parameters.
///
/// # Safety
/// Non-null pointers must be valid for their advertised use.
#[no_mangle]
pub unsafe extern "C" fn vprk_run_experiment(
    name: *const c_char,
    overrides_json: *const c_char,
    csv_path: *const c_char,
    out_verdict: *mut VprkVerdict,
    out_matches_expectation: *mut bool,
    out_report_json: *mut *mut c_char,
) -> VprkStatus {
    guard(|| {
        let name = match utf8(name) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let overrides = if overrides_json.is_null() {
            None
        } else {
            let text = match utf8(overrides_json) {
                Ok(t) => t,
                Err(s) => return s,
            };
            match ConfigOverrides::from_json(text) {
                Ok(parsed) => Some(parsed),
                Err(e) => return fail(&e),
            }
        };
        let report = match run_named(name, overrides.as_ref()) {
            Ok(r) => r,
            Err(e) => return fail(&e),
        };
        if !csv_path.is_null() {
            let path = match utf8(csv_path) {
                Ok(t) => PathBuf::from(t),
                Err(s) => return s,
            };
            if let Err(e) = emit_csv(&report, &path) {
                return fail(&e);
            }
        }
        if !out_verdict.is_null() {
            *out_verdict = match report.verdict {
                vprk::experiments::Verdict::Preserved => VprkVerdict::Preserved,
                vprk::experiments::Verdict::Violated => VprkVerdict::Violated,
                vprk::experiments::Verdict::Inconclusive => VprkVerdict::Inconclusive,
            };
        }
        if !out_matches_expectation.is_null() {
            *out_matches_expectation = report.matches_expectation();
        }
        if !out_report_json.is_null() {
            match serde_json::to_string(&report) {
                Ok(text) => give_string(out_report_json, text),
                Err(e) => {
                    set_error(&e.to_string());
                    return VprkStatus::InvalidJson;
                }
            }
        }
        VprkStatus::Ok
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_is_nul_terminated() {
        let v = unsafe { CStr::from_ptr(vprk_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
