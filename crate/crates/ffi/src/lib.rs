//! C ABI over the `itemdiff` library.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_fit`/
//! `*_load` functions and released with the matching `*_free`. Every fallible
//! call returns an [`ItemdiffStatus`]; on failure a description is available
//! from [`itemdiff_last_error_message`] on the same thread. Matrices are
//! passed as row-major `double` arrays. Panics never unwind into C: they are
//! reported as `ITEMDIFF_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nalgebra::DMatrix;

use itemdiff::numerics::{PcaModel, RidgeModel};
use itemdiff::runner::{run_grid, RunConfig};
use itemdiff::scale::{AbilityScale, Anchors, Easiness, VerticalScale};
use itemdiff::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ItemdiffStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    BufferTooSmall = 4,
    Io = 5,
    Bank = 6,
    Scale = 7,
    Features = 8,
    Text = 9,
    Embed = 10,
    Numerics = 11,
    Eval = 12,
    Run = 13,
    Panic = 14,
}

/// A single vertical scale or a per-year composite.
pub struct ItemdiffScale(VerticalScale);

/// A fitted ridge regression.
pub struct ItemdiffRidge(RidgeModel);

/// A fitted PCA projection.
pub struct ItemdiffPca(PcaModel);

/// A loaded experiment config.
pub struct ItemdiffConfig(RunConfig);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(ItemdiffStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Bank(_) => ItemdiffStatus::Bank,
            Error::Scale(_) => ItemdiffStatus::Scale,
            Error::Features(_) => ItemdiffStatus::Features,
            Error::Numerics(_) => ItemdiffStatus::Numerics,
            Error::Text(_) => ItemdiffStatus::Text,
            Error::Embed(_) => ItemdiffStatus::Embed,
            Error::Eval(_) => ItemdiffStatus::Eval,
            Error::Run(_) => ItemdiffStatus::Run,
            Error::Io(_) => ItemdiffStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

macro_rules! from_module_error {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Error::from(e).into()
            }
        }
    )*};
}

from_module_error!(
    itemdiff::scale::ScaleError,
    itemdiff::numerics::NumericsError,
    itemdiff::runner::RunError
);

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(ItemdiffStatus::InvalidArgument, msg.into())
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, converting errors and panics into a status and the thread's
/// last error message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ItemdiffStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ItemdiffStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            ItemdiffStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(ItemdiffStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(ItemdiffStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn matrix(x: *const f64, rows: usize, cols: usize) -> Result<DMatrix<f64>, Failure> {
    if rows == 0 || cols == 0 {
        return Err(invalid("matrix must have at least one row and column"));
    }
    if x.is_null() {
        return Err(null("x"));
    }
    let len = rows.checked_mul(cols).ok_or_else(|| invalid("matrix size overflows"))?;
    Ok(DMatrix::from_row_slice(rows, cols, std::slice::from_raw_parts(x, len)))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("interior nul removed").into_raw()
}

fn boxed<T>(out: &mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn itemdiff_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL if none has
/// failed. Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn itemdiff_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a string allocated by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn itemdiff_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Looks up a built-in scale or composite by name.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn itemdiff_scale_builtin(name: *const c_char, out: *mut *mut ItemdiffScale) -> ItemdiffStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let name = str_arg(name, "name")?;
        boxed(out, ItemdiffScale(VerticalScale::builtin(name)?));
        Ok(())
    })
}

/// Parses a scale definition (JSON with `grade_means` and either `affine`
/// or `anchors`).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn itemdiff_scale_from_json(json: *const c_char, out: *mut *mut ItemdiffScale) -> ItemdiffStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let json = str_arg(json, "json")?;
        boxed(out, ItemdiffScale(VerticalScale::Single(AbilityScale::from_json(json.as_bytes())?)));
        Ok(())
    })
}

/// A copy of a single scale with its affine map refitted so that an item
/// with p-value `p` lands at `b_a` in `grade_a` and at `b_b` in `grade_b`.
///
/// # Safety
/// `scale` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn itemdiff_scale_with_anchors(
    scale: *const ItemdiffScale,
    grade_a: u8,
    b_a: f64,
    grade_b: u8,
    b_b: f64,
    p: f64,
    out: *mut *mut ItemdiffScale,
) -> ItemdiffStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let VerticalScale::Single(s) = &handle(scale, "scale")?.0 else {
            return Err(invalid("anchors apply to single scales only"));
        };
        let anchors = Anchors {
            grade_a,
            b_a,
            grade_b,
            b_b,
            p,
        };
        let refit = AbilityScale::with_anchors(s.name.clone(), s.grade_means.clone(), anchors)?;
        boxed(out, ItemdiffScale(VerticalScale::Single(refit)));
        Ok(())
    })
}

/// Easiness of an item with p-value `p` answered by `grade` in `year`.
/// `year` only matters for composite scales.
///
/// # Safety
/// `scale` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn itemdiff_scale_rescale(
    scale: *const ItemdiffScale,
    p: f64,
    grade: u8,
    year: i32,
    out: *mut f64,
) -> ItemdiffStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = handle(scale, "scale")?.0.rescale(p, grade, year)?.value();
        Ok(())
    })
}

/// The p-value that maps to easiness `b`; inverse of
/// [`itemdiff_scale_rescale`].
///
/// # Safety
/// `scale` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn itemdiff_scale_invert(
    scale: *const ItemdiffScale,
    b: f64,
    grade: u8,
    year: i32,
    out: *mut f64,
) -> ItemdiffStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let s = handle(scale, "scale")?.0.scale_for_year(year)?;
        *out = s.invert_easiness(Easiness(b), grade)?;
        Ok(())
    })
}

/// # Safety
/// `scale` must be NULL or a live handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn itemdiff_scale_free(scale: *mut ItemdiffScale) {
    if !scale.is_null() {
        drop(Box::from_raw(scale));
    }
}

/// Fits ridge regression on the `n x p` row-major matrix `x` and outcome
/// `y` (length `n`).
///
/// # Safety
/// `x` must hold `n * p` doubles, `y` `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn itemdiff_ridge_fit(
    x: *const f64,
    n: usize,
    p: usize,
    y: *const f64,
    lambda: f64,
    out: *mut *mut ItemdiffRidge,
) -> ItemdiffStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let x = matrix(x, n, p)?;
        if y.is_null() {
            return Err(null("y"));
        }
        let y = std::slice::from_raw_parts(y, n);
        boxed(out, ItemdiffRidge(RidgeModel::fit(&x, y, lambda)?));
        Ok(())
    })
}

/// Number of predictors the model was fitted on.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn itemdiff_ridge_n_features(model: *const ItemdiffRidge) -> usize {
    model.as_ref().map_or(0, |m| m.0.n_features())
}

/// Predictions for the `n x p` row-major matrix `x`, written to `out`
/// (length `n`).
///
/// # Safety
/// `x` must hold `n * p` doubles and `out` room for `n`.
#[no_mangle]
pub unsafe extern "C" fn itemdiff_ridge_predict(
    model: *const ItemdiffRidge,
    x: *const f64,
    n: usize,
    p: usize,
    out: *mut f64,
) -> ItemdiffStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let x = matrix(x, n, p)?;
        let pred = m.0.predict(&x)?;
        out_slice(out, n, "out")?.copy_from_slice(&pred);
        Ok(())
    })
}

/// Coefficients and intercept on the original (unstandardized) inputs.
/// `out` needs room for `len >= n_features` values.
///
/// # Safety
/// `out` must hold `len` doubles; `intercept` must be writable.
#[no_mangle]
pub unsafe extern "C" fn itemdiff_ridge_raw_coefficients(
    model: *const ItemdiffRidge,
    out: *mut f64,
    len: usize,
    intercept: *mut f64,
) -> ItemdiffStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let intercept = out_ptr(intercept, "intercept")?;
        let (coefs, b0) = m.0.raw_coefficients();
        if len < coefs.len() {
            return Err(Failure(
                ItemdiffStatus::BufferTooSmall,
                format!("need {} values, buffer holds {len}", coefs.len()),
            ));
        }
        out_slice(out, coefs.len(), "out")?.copy_from_slice(&coefs);
        *intercept = b0;
        Ok(())
    })
}

/// Serialized model; free with [`itemdiff_string_free`].
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn itemdiff_ridge_to_json(model: *const ItemdiffRidge, out: *mut *mut c_char) -> ItemdiffStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let m = handle(model, "model")?;
        *out = into_c_string(serde_json::to_string(&m.0).expect("model serializes"));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a live handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn itemdiff_ridge_free(model: *mut ItemdiffRidge) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Fits PCA on the `n x p` row-major matrix `x`, keeping the fewest
/// components whose cumulative explained-variance ratio reaches
/// `variance_target`.
///
/// # Safety
/// `x` must hold `n * p` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn itemdiff_pca_fit(
    x: *const f64,
    n: usize,
    p: usize,
    variance_target: f64,
    out: *mut *mut ItemdiffPca,
) -> ItemdiffStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let x = matrix(x, n, p)?;
        boxed(out, ItemdiffPca(PcaModel::fit(&x, variance_target)?));
        Ok(())
    })
}

/// Number of kept components.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn itemdiff_pca_k(model: *const ItemdiffPca) -> usize {
    model.as_ref().map_or(0, |m| m.0.k)
}

/// Explained-variance ratios of all components, largest first. On
/// `ITEMDIFF_STATUS_BUFFER_TOO_SMALL`, `*written` holds the needed length.
///
/// # Safety
/// `out` must hold `len` doubles; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn itemdiff_pca_explained_variance_ratio(
    model: *const ItemdiffPca,
    out: *mut f64,
    len: usize,
    written: *mut usize,
) -> ItemdiffStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let written = out_ptr(written, "written")?;
        let r = &m.0.explained_variance_ratio;
        *written = r.len();
        if len < r.len() {
            return Err(Failure(
                ItemdiffStatus::BufferTooSmall,
                format!("need {} values, buffer holds {len}", r.len()),
            ));
        }
        out_slice(out, r.len(), "out")?.copy_from_slice(r);
        Ok(())
    })
}

/// Scores of the `n x p` rows of `x` on the kept components, written
/// row-major to `out` (`n * k` values).
///
/// # Safety
/// `x` must hold `n * p` doubles and `out` room for `n * k`.
#[no_mangle]
pub unsafe extern "C" fn itemdiff_pca_transform(
    model: *const ItemdiffPca,
    x: *const f64,
    n: usize,
    p: usize,
    out: *mut f64,
) -> ItemdiffStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let scores = m.0.transform(&matrix(x, n, p)?)?;
        let dst = out_slice(out, scores.len(), "out")?;
        for r in 0..scores.nrows() {
            for c in 0..scores.ncols() {
                dst[r * scores.ncols() + c] = scores[(r, c)];
            }
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a live handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn itemdiff_pca_free(model: *mut ItemdiffPca) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Loads and validates a run config. Relative paths inside it resolve
/// against its directory.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn itemdiff_config_load(path: *const c_char, out: *mut *mut ItemdiffConfig) -> ItemdiffStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let path = str_arg(path, "path")?;
        boxed(out, ItemdiffConfig(RunConfig::load(Path::new(path))?));
        Ok(())
    })
}

/// Hash identifying the config's results; free with
/// [`itemdiff_string_free`].
///
/// # Safety
/// `config` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn itemdiff_config_fingerprint(
    config: *const ItemdiffConfig,
    out: *mut *mut c_char,
) -> ItemdiffStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = into_c_string(handle(config, "config")?.0.fingerprint());
        Ok(())
    })
}

/// Runs the baseline and every spec, writing report files to the config's
/// output directory. `*reports_json` receives the reports as a JSON array;
/// free it with [`itemdiff_string_free`].
///
/// # Safety
/// `config` must be a live handle; `reports_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn itemdiff_run_grid(config: *const ItemdiffConfig, reports_json: *mut *mut c_char) -> ItemdiffStatus {
    guard(|| {
        let out = out_ptr(reports_json, "reports_json")?;
        let run = run_grid(&handle(config, "config")?.0)?;
        *out = into_c_string(itemdiff::eval::reports_to_json(&run.reports));
        Ok(())
    })
}

/// # Safety
/// `config` must be NULL or a live handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn itemdiff_config_free(config: *mut ItemdiffConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}
