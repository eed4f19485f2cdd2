//! C ABI for `sdwlda`.
//!
//! Handles are opaque and owned by the caller once returned; release them with
//! the matching `*_free` function. Every fallible call returns an
//! [`SdwldaStatus`] and, on failure, records a message retrievable with
//! [`sdwlda_last_error`] on the same thread. Matrices are dense row-major
//! `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sdwlda::scatter::Dataset;
use sdwlda::symmat::Matrix;
use sdwlda::wlda::{fit_bisection, read_model, write_model, FitError, ModelIoError, SavedModel, WldaConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdwldaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Malformed or degenerate input data.
    Data = 3,
    /// The solver could not produce a certified model.
    Solver = 4,
    Io = 5,
    /// A Rust panic was caught at the boundary.
    Internal = 6,
}

/// Labelled training data.
pub struct SdwldaDataset {
    inner: Dataset,
}

/// A fitted projection.
pub struct SdwldaModel {
    inner: SavedModel,
}

/// Fit parameters. Obtain defaults from [`sdwlda_fit_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SdwldaFitOptions {
    /// Target dimension.
    pub r: usize,
    /// Relative bisection tolerance.
    pub sigma: f64,
    /// Infeasibility certificate threshold.
    pub epsilon: f64,
    /// Primal verification tolerance.
    pub primal_tol: f64,
    pub delta_cap: f64,
    pub max_bisection_steps: usize,
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

fn fail(status: SdwldaStatus, msg: impl Into<String>) -> SdwldaStatus {
    set_error(msg);
    status
}

fn fit_status(e: &FitError) -> SdwldaStatus {
    match e {
        FitError::Data(_) | FitError::Degenerate | FitError::WidthMismatch { .. } => SdwldaStatus::Data,
        FitError::InvalidConfig(_) => SdwldaStatus::InvalidArgument,
        FitError::Linalg(_) | FitError::Solve(_) | FitError::Uncertified { .. } => SdwldaStatus::Solver,
    }
}

fn guard(f: impl FnOnce() -> SdwldaStatus) -> SdwldaStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(SdwldaStatus::Internal, format!("internal error: {msg}"))
        }
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<String, SdwldaStatus> {
    if path.is_null() {
        return Err(fail(SdwldaStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| fail(SdwldaStatus::InvalidArgument, "path is not valid UTF-8"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sdwlda_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent failure on this thread, or NULL.
/// The pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn sdwlda_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn sdwlda_fit_options_default(r: usize) -> SdwldaFitOptions {
    let c = WldaConfig::new(r);
    SdwldaFitOptions {
        r,
        sigma: c.sigma,
        epsilon: c.feasibility.epsilon,
        primal_tol: c.feasibility.primal_tol,
        delta_cap: c.delta_cap,
        max_bisection_steps: c.max_bisection_steps,
    }
}

/// Copies `n x d` samples and `n` labels in `0..num_classes` into a new dataset.
///
/// # Safety
/// `samples` must point to `n * d` doubles and `labels` to `n` values.
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdwlda_dataset_new(
    samples: *const f64,
    labels: *const usize,
    n: usize,
    d: usize,
    num_classes: usize,
    out: *mut *mut SdwldaDataset,
) -> SdwldaStatus {
    guard(|| {
        if samples.is_null() || labels.is_null() || out.is_null() {
            return fail(SdwldaStatus::NullPointer, "null argument to sdwlda_dataset_new");
        }
        *out = ptr::null_mut();
        let Some(len) = n.checked_mul(d) else {
            return fail(SdwldaStatus::InvalidArgument, "n * d overflows");
        };
        let x = std::slice::from_raw_parts(samples, len).to_vec();
        let y = std::slice::from_raw_parts(labels, n).to_vec();
        match Dataset::new(Matrix::from_row_major(n, d, x), y, num_classes) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SdwldaDataset { inner }));
                SdwldaStatus::Ok
            }
            Err(e) => fail(SdwldaStatus::Data, e.to_string()),
        }
    })
}

/// # Safety
/// `dataset` must be NULL or a handle from [`sdwlda_dataset_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sdwlda_dataset_free(dataset: *mut SdwldaDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Fits a model. `options` may be NULL to use the defaults with `r = 1`.
///
/// # Safety
/// `dataset` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdwlda_fit(
    dataset: *const SdwldaDataset,
    options: *const SdwldaFitOptions,
    out: *mut *mut SdwldaModel,
) -> SdwldaStatus {
    guard(|| {
        if dataset.is_null() || out.is_null() {
            return fail(SdwldaStatus::NullPointer, "null argument to sdwlda_fit");
        }
        *out = ptr::null_mut();
        let opts = if options.is_null() { sdwlda_fit_options_default(1) } else { *options };
        let mut config = WldaConfig::new(opts.r);
        config.sigma = opts.sigma;
        config.delta_cap = opts.delta_cap;
        config.max_bisection_steps = opts.max_bisection_steps;
        config.feasibility.epsilon = opts.epsilon;
        config.feasibility.primal_tol = opts.primal_tol;
        if !(opts.epsilon > 0.0) || !(opts.primal_tol > 0.0) {
            return fail(SdwldaStatus::InvalidArgument, "epsilon and primal_tol must be positive");
        }
        match fit_bisection(&(*dataset).inner, &config) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(SdwldaModel { inner: model.to_saved() }));
                SdwldaStatus::Ok
            }
            Err(e) => fail(fit_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `model` must be NULL or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn sdwlda_model_free(model: *mut SdwldaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input feature width, or 0 for a NULL handle.
///
/// # Safety
/// `model` must be NULL or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn sdwlda_model_input_dim(model: *const SdwldaModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.projection.input_dim())
}

/// Output width `r`, or 0 for a NULL handle.
///
/// # Safety
/// `model` must be NULL or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn sdwlda_model_output_dim(model: *const SdwldaModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.projection.output_dim())
}

/// Certified worst-case ratio level, or NaN for a NULL handle.
///
/// # Safety
/// `model` must be NULL or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn sdwlda_model_delta_star(model: *const SdwldaModel) -> f64 {
    model.as_ref().map_or(f64::NAN, |m| m.inner.delta_star)
}

/// Worst-case ratio attained by the relaxed solution, or NaN for a NULL handle.
///
/// # Safety
/// `model` must be NULL or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn sdwlda_model_ratio_achieved(model: *const SdwldaModel) -> f64 {
    model.as_ref().map_or(f64::NAN, |m| m.inner.ratio_achieved)
}

/// Copies the `d x r` projection matrix into `out` (row-major).
///
/// # Safety
/// `out` must have room for `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sdwlda_model_weights(model: *const SdwldaModel, out: *mut f64, out_len: usize) -> SdwldaStatus {
    guard(|| {
        let (Some(m), false) = (model.as_ref(), out.is_null()) else {
            return fail(SdwldaStatus::NullPointer, "null argument to sdwlda_model_weights");
        };
        let w = m.inner.projection.w.as_slice();
        if out_len < w.len() {
            return fail(SdwldaStatus::InvalidArgument, format!("output buffer holds {out_len} values, need {}", w.len()));
        }
        std::slice::from_raw_parts_mut(out, w.len()).copy_from_slice(w);
        SdwldaStatus::Ok
    })
}

/// Projects `n` rows of width `d_in` into `out`, which receives `n * r` values.
///
/// # Safety
/// `x` must point to `n * d_in` doubles and `out` to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sdwlda_model_transform(
    model: *const SdwldaModel,
    x: *const f64,
    n: usize,
    d_in: usize,
    out: *mut f64,
    out_len: usize,
) -> SdwldaStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(SdwldaStatus::NullPointer, "model is null");
        };
        if x.is_null() || out.is_null() {
            return fail(SdwldaStatus::NullPointer, "null buffer to sdwlda_model_transform");
        }
        let r = m.inner.projection.output_dim();
        let (Some(len_in), Some(len_out)) = (n.checked_mul(d_in), n.checked_mul(r)) else {
            return fail(SdwldaStatus::InvalidArgument, "buffer size overflows");
        };
        if out_len < len_out {
            return fail(SdwldaStatus::InvalidArgument, format!("output buffer holds {out_len} values, need {len_out}"));
        }
        let input = Matrix::from_row_major(n, d_in, std::slice::from_raw_parts(x, len_in).to_vec());
        match m.inner.projection.transform(&input) {
            Ok(y) => {
                std::slice::from_raw_parts_mut(out, len_out).copy_from_slice(y.as_slice());
                SdwldaStatus::Ok
            }
            Err(e) => fail(fit_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn sdwlda_model_save(model: *const SdwldaModel, path: *const c_char) -> SdwldaStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(SdwldaStatus::NullPointer, "model is null");
        };
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let result = File::create(&path).and_then(|f| {
            let mut w = BufWriter::new(f);
            write_model(&m.inner, &mut w)?;
            w.flush()
        });
        match result {
            Ok(()) => SdwldaStatus::Ok,
            Err(e) => fail(SdwldaStatus::Io, format!("{path}: {e}")),
        }
    })
}

/// # Safety
/// `path` must be a NUL-terminated UTF-8 string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sdwlda_model_load(path: *const c_char, out: *mut *mut SdwldaModel) -> SdwldaStatus {
    guard(|| {
        if out.is_null() {
            return fail(SdwldaStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) => return fail(SdwldaStatus::Io, format!("{path}: {e}")),
        };
        match read_model(BufReader::new(file)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SdwldaModel { inner }));
                SdwldaStatus::Ok
            }
            Err(e @ ModelIoError::Io(_)) => fail(SdwldaStatus::Io, format!("{path}: {e}")),
            Err(e) => fail(SdwldaStatus::Data, format!("{path}: {e}")),
        }
    })
}
