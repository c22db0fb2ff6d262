//! C ABI over `cpmap`. Maps live behind an opaque handle; structured results
//! come back as JSON strings owned by the library and released with
//! `cpmap_string_free`. Every call returns a `CpmapStatus`; on failure
//! `cpmap_last_error` describes the most recent error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cpmap::cli::{self, CliError, CommonOpts};
use cpmap::json::{MapFile, MapForm};
use cpmap::linalg::Field;
use cpmap::mapmodel::{is_star_linear, MapSpec};
use cpmap::positivity;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpmapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    NotStarLinear = 4,
    Failure = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpmapField {
    /// Keep the field recorded in the input.
    Default = 0,
    Real = 1,
    Complex = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpmapForm {
    Matricization = 0,
    Choi = 1,
}

/// Opaque map handle.
pub struct CpmapMap {
    spec: MapSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(CpmapStatus, String);

impl From<CliError> for Fail {
    fn from(e: CliError) -> Self {
        let status = match e {
            CliError::Parse(_) => CpmapStatus::Parse,
            CliError::NotStarLinear(_) => CpmapStatus::NotStarLinear,
            CliError::Other(_) => CpmapStatus::Failure,
        };
        Fail(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CpmapStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CpmapStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CpmapStatus::Panic
        }
    }
}

fn null() -> Fail {
    Fail(CpmapStatus::NullPointer, "null pointer argument".into())
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(null());
    }
    CStr::from_ptr(s).to_str().map_err(|e| Fail(CpmapStatus::InvalidUtf8, e.to_string()))
}

unsafe fn map_ref<'a>(m: *const CpmapMap) -> Result<&'a CpmapMap, Fail> {
    m.as_ref().ok_or_else(null)
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    let c = CString::new(s).map_err(|e| Fail(CpmapStatus::Failure, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

fn field_of(f: CpmapField) -> Option<Field> {
    match f {
        CpmapField::Default => None,
        CpmapField::Real => Some(Field::Real),
        CpmapField::Complex => Some(Field::Complex),
    }
}

fn opts(tol: f64, seed: u64, budget: usize) -> CommonOpts {
    CommonOpts { field: None, tol, seed, budget, json: true, set: None }
}

fn json<T: serde::Serialize>(v: &T) -> Result<String, Fail> {
    serde_json::to_string(v).map_err(|e| Fail(CpmapStatus::Failure, e.to_string()))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn cpmap_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn cpmap_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a map file (JSON with `n`, `q` and one of `matricization`/`choi`).
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cpmap_map_from_json(text: *const c_char, field: CpmapField, out: *mut *mut CpmapMap) -> CpmapStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        *out = ptr::null_mut();
        let text = read_str(text)?;
        let file = MapFile::parse(text).map_err(|e| Fail(CpmapStatus::Parse, e.to_string()))?;
        let spec = file.to_spec(field_of(field)).map_err(|e| Fail(CpmapStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(CpmapMap { spec }));
        Ok(())
    })
}

/// Builds a named example map; `params` is `name=value,...` or null.
///
/// # Safety
/// `name` must be NUL-terminated, `params` NUL-terminated or null, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cpmap_map_from_zoo(
    name: *const c_char,
    params: *const c_char,
    field: CpmapField,
    seed: u64,
    out: *mut *mut CpmapMap,
) -> CpmapStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        *out = ptr::null_mut();
        let name = read_str(name)?;
        let set = if params.is_null() { None } else { Some(read_str(params)?.to_string()) };
        let o = CommonOpts { field: field_of(field), set, seed, ..opts(cpmap::linalg::DEFAULT_TOL, seed, 1) };
        let spec = cli::load_map(&format!("zoo:{name}"), &o)?;
        *out = Box::into_raw(Box::new(CpmapMap { spec }));
        Ok(())
    })
}

/// Releases a map handle. Null is ignored.
///
/// # Safety
/// `map` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn cpmap_map_free(map: *mut CpmapMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// # Safety
/// `map` must be a live handle; `n` and `q` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cpmap_map_dims(map: *const CpmapMap, n: *mut usize, q: *mut usize) -> CpmapStatus {
    guard(|| {
        let m = map_ref(map)?;
        if n.is_null() || q.is_null() {
            return Err(null());
        }
        *n = m.spec.n();
        *q = m.spec.q();
        Ok(())
    })
}

/// # Safety
/// `map` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cpmap_map_is_star_linear(map: *const CpmapMap, tol: f64, out: *mut bool) -> CpmapStatus {
    guard(|| {
        let m = map_ref(map)?;
        if out.is_null() {
            return Err(null());
        }
        *out = is_star_linear(&m.spec, tol).star_linear;
        Ok(())
    })
}

/// Complete positivity from the Choi spectrum; `min_eigenvalue` may be null.
///
/// # Safety
/// `map` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cpmap_map_is_completely_positive(
    map: *const CpmapMap,
    tol: f64,
    out: *mut bool,
    min_eigenvalue: *mut f64,
) -> CpmapStatus {
    guard(|| {
        let m = map_ref(map)?;
        if out.is_null() {
            return Err(null());
        }
        let v = positivity::is_completely_positive(&m.spec, tol).map_err(|e| Fail(CpmapStatus::Failure, e.to_string()))?;
        *out = v.completely_positive;
        if !min_eigenvalue.is_null() {
            *min_eigenvalue = v.min_eigenvalue;
        }
        Ok(())
    })
}

/// Full analysis report as JSON. A map that is not star-linear returns
/// `NotStarLinear` and still writes the partial report.
///
/// # Safety
/// `map` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cpmap_map_analyze_json(
    map: *const CpmapMap,
    tol: f64,
    seed: u64,
    budget: usize,
    out: *mut *mut c_char,
) -> CpmapStatus {
    guard(|| {
        let m = map_ref(map)?;
        if out.is_null() {
            return Err(null());
        }
        *out = ptr::null_mut();
        match cli::analyze(&m.spec, "ffi", &opts(tol, seed, budget)) {
            Ok(r) => write_string(out, json(&r)?),
            Err(CliError::NotStarLinear(r)) => {
                write_string(out, json(&r)?)?;
                Err(Fail(CpmapStatus::NotStarLinear, "map is not star-linear".into()))
            }
            Err(e) => Err(e.into()),
        }
    })
}

/// The map file for `map` in the requested form.
///
/// # Safety
/// `map` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cpmap_map_to_json(map: *const CpmapMap, form: CpmapForm, out: *mut *mut c_char) -> CpmapStatus {
    guard(|| {
        let m = map_ref(map)?;
        if out.is_null() {
            return Err(null());
        }
        let form = match form {
            CpmapForm::Matricization => MapForm::Matricization,
            CpmapForm::Choi => MapForm::Choi,
        };
        write_string(out, json(&MapFile::from_spec(&m.spec, form))?)
    })
}

/// Range membership of `y` (comma-separated, entries `re` or `re:im`) for
/// the map's Hill coefficient matrix, as JSON.
///
/// # Safety
/// `map` must be a live handle, `y` NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cpmap_map_range_json(
    map: *const CpmapMap,
    y: *const c_char,
    tol: f64,
    seed: u64,
    out: *mut *mut c_char,
) -> CpmapStatus {
    guard(|| {
        let m = map_ref(map)?;
        if out.is_null() {
            return Err(null());
        }
        let y = cli::parse_vector(read_str(y)?)?;
        let r = cli::range_query(&m.spec, "ffi", &y, &opts(tol, seed, 64))?;
        write_string(out, json(&r)?)
    })
}

/// The 2x2 block pattern census as JSON.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cpmap_census_json(out: *mut *mut c_char) -> CpmapStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        write_string(out, json(&cli::census())?)
    })
}
