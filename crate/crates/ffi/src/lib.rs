//! C ABI over the `kehmode` classifier.
//!
//! Models and results are opaque handles owned by the caller and released
//! with the matching `*_free` function. Every fallible call returns a
//! [`KehStatus`]; on failure, [`keh_last_error_message`] describes the error
//! for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use kehmode::classifier;
use kehmode::pipeline::TrainedModel;
use kehmode::signal::{TraceMeta, VoltageTrace};
use kehmode::{Error, Mode};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KehStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    InvalidInput = 3,
    Io = 4,
    Parse = 5,
    TraceTooShort = 6,
    NoSignal = 7,
    NotConverged = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Transportation modes; values match the library's class indices.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KehMode {
    Bus = 0,
    Train = 1,
    Car = 2,
    Ferry = 3,
    LightRail = 4,
}

impl From<Mode> for KehMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Bus => KehMode::Bus,
            Mode::Train => KehMode::Train,
            Mode::Car => KehMode::Car,
            Mode::Ferry => KehMode::Ferry,
            Mode::LightRail => KehMode::LightRail,
        }
    }
}

/// A trained model loaded from a model file.
pub struct KehModel {
    inner: TrainedModel,
}

/// Outcome of classifying a feature vector or a whole trace.
pub struct KehResult {
    predicted: Mode,
    /// Per-class residuals in model class order; for traces, the mean over
    /// windows.
    residuals: Vec<f64>,
    /// Per-class window votes in model class order.
    votes: Vec<u32>,
    low_confidence: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> KehStatus {
    match err {
        Error::InvalidParameter { .. } => KehStatus::InvalidParameter,
        Error::Io { .. } => KehStatus::Io,
        Error::Json { .. } | Error::Csv { .. } => KehStatus::Parse,
        Error::TraceTooShort { .. } => KehStatus::TraceTooShort,
        Error::NoSignal { .. } => KehStatus::NoSignal,
        Error::NotConverged { .. } | Error::LowConfidence(_) => KehStatus::NotConverged,
        _ => KehStatus::InvalidInput,
    }
}

fn fail(status: KehStatus, msg: &str) -> KehStatus {
    set_error(msg);
    status
}

fn guard<F: FnOnce() -> KehStatus>(f: F) -> KehStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(KehStatus::Panic, "internal panic"),
    }
}

fn from_result<T>(r: kehmode::Result<T>, out: impl FnOnce(T)) -> KehStatus {
    match r {
        Ok(v) => {
            out(v);
            KehStatus::Ok
        }
        Err(e) => fail(status_of(&e), &e.to_string()),
    }
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn keh_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static, NUL-terminated name of a mode (`"bus"`, `"light_rail"`, ...).
#[no_mangle]
pub extern "C" fn keh_mode_name(mode: KehMode) -> *const c_char {
    let s: &'static CStr = match mode {
        KehMode::Bus => c"bus",
        KehMode::Train => c"train",
        KehMode::Car => c"car",
        KehMode::Ferry => c"ferry",
        KehMode::LightRail => c"light_rail",
    };
    s.as_ptr()
}

/// Loads a model file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn keh_model_load(path: *const c_char, out: *mut *mut KehModel) -> KehStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return fail(KehStatus::NullPointer, "null argument");
        }
        let Ok(p) = CStr::from_ptr(path).to_str() else {
            return fail(KehStatus::InvalidParameter, "path is not UTF-8");
        };
        from_result(TrainedModel::load(Path::new(p)), |m| {
            *out = Box::into_raw(Box::new(KehModel { inner: m }));
        })
    })
}

/// Parses a model from `len` bytes of JSON.
///
/// # Safety
/// `json` must point to `len` readable bytes and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn keh_model_from_json(
    json: *const c_char,
    len: usize,
    out: *mut *mut KehModel,
) -> KehStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return fail(KehStatus::NullPointer, "null argument");
        }
        let bytes = std::slice::from_raw_parts(json.cast::<u8>(), len);
        let Ok(text) = std::str::from_utf8(bytes) else {
            return fail(KehStatus::Parse, "model JSON is not UTF-8");
        };
        from_result(TrainedModel::from_json(text), |m| {
            *out = Box::into_raw(Box::new(KehModel { inner: m }));
        })
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `model` must come from a `keh_model_*` constructor and not be used after.
#[no_mangle]
pub unsafe extern "C" fn keh_model_free(model: *mut KehModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of classes the model distinguishes; 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn keh_model_class_count(model: *const KehModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.classes().len())
}

/// Mode of class `index` in model order.
///
/// # Safety
/// `model` must be a live model handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn keh_model_class_at(
    model: *const KehModel,
    index: usize,
    out: *mut KehMode,
) -> KehStatus {
    let (Some(m), false) = (model.as_ref(), out.is_null()) else {
        return fail(KehStatus::NullPointer, "null argument");
    };
    match m.inner.classes().get(index) {
        Some(c) => {
            *out = (*c).into();
            KehStatus::Ok
        }
        None => fail(KehStatus::InvalidParameter, "class index out of range"),
    }
}

/// Length of the full feature vector accepted by [`keh_classify_features`].
///
/// # Safety
/// `model` must be NULL or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn keh_model_feature_count(model: *const KehModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.feature_spec.len())
}

/// Sampling rate the model was trained at, in Hz.
///
/// # Safety
/// `model` must be NULL or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn keh_model_sampling_rate_hz(model: *const KehModel) -> f64 {
    model
        .as_ref()
        .map_or(0.0, |m| m.inner.feature_spec.sampling_rate_hz)
}

/// Classifies one full (unselected) feature vector of
/// [`keh_model_feature_count`] values.
///
/// # Safety
/// `values` must point to `len` doubles; `model` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn keh_classify_features(
    model: *const KehModel,
    values: *const f64,
    len: usize,
    out: *mut *mut KehResult,
) -> KehStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(KehStatus::NullPointer, "null model");
        };
        if values.is_null() || out.is_null() {
            return fail(KehStatus::NullPointer, "null argument");
        }
        let values = std::slice::from_raw_parts(values, len);
        if len != m.inner.feature_spec.len() {
            return fail(
                KehStatus::InvalidInput,
                &format!("expected {} features, got {len}", m.inner.feature_spec.len()),
            );
        }
        let projected = m.inner.selection.project(values);
        from_result(classifier::classify_lenient(&m.inner.src, &projected), |r| {
            let classes = m.inner.classes();
            let votes = classes.iter().map(|c| u32::from(*c == r.predicted)).collect();
            *out = Box::into_raw(Box::new(KehResult {
                predicted: r.predicted,
                residuals: r.residuals,
                votes,
                low_confidence: r.low_confidence,
            }));
        })
    })
}

/// Runs the full chain on raw voltage samples and votes over windows.
///
/// # Safety
/// `samples` must point to `len` doubles; `model` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn keh_classify_trace(
    model: *const KehModel,
    samples: *const f64,
    len: usize,
    sampling_rate_hz: f64,
    out: *mut *mut KehResult,
) -> KehStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(KehStatus::NullPointer, "null model");
        };
        if samples.is_null() || out.is_null() {
            return fail(KehStatus::NullPointer, "null argument");
        }
        let samples = std::slice::from_raw_parts(samples, len).to_vec();
        let trace = match VoltageTrace::new(samples, sampling_rate_hz, TraceMeta::default()) {
            Ok(t) => t,
            Err(e) => return fail(status_of(&e), &e.to_string()),
        };
        from_result(m.inner.classify_trace(&trace), |t| {
            let c = t.class_list.len();
            let mut residuals = vec![0.0; c];
            for w in &t.windows {
                for (acc, r) in residuals.iter_mut().zip(&w.residuals) {
                    *acc += r / t.windows.len() as f64;
                }
            }
            *out = Box::into_raw(Box::new(KehResult {
                predicted: t.majority,
                residuals,
                votes: t.votes.iter().map(|v| *v as u32).collect(),
                low_confidence: t.low_confidence_windows > 0,
            }));
        })
    })
}

/// Predicted mode of a result.
///
/// # Safety
/// `result` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn keh_result_predicted(result: *const KehResult) -> KehMode {
    (*result).predicted.into()
}

/// Whether any solve behind this result hit its iteration limit.
///
/// # Safety
/// `result` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn keh_result_low_confidence(result: *const KehResult) -> bool {
    (*result).low_confidence
}

/// Number of windows that voted (1 for a feature vector).
///
/// # Safety
/// `result` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn keh_result_window_count(result: *const KehResult) -> usize {
    (*result).votes.iter().map(|v| *v as usize).sum()
}

/// Copies per-class residuals (model class order) into `buf`. Fails with
/// `BufferTooSmall` if `cap` is below the class count.
///
/// # Safety
/// `result` must be live and `buf` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn keh_result_residuals(
    result: *const KehResult,
    buf: *mut f64,
    cap: usize,
) -> KehStatus {
    let Some(r) = result.as_ref() else {
        return fail(KehStatus::NullPointer, "null result");
    };
    if buf.is_null() {
        return fail(KehStatus::NullPointer, "null buffer");
    }
    if cap < r.residuals.len() {
        return fail(KehStatus::BufferTooSmall, "buffer smaller than class count");
    }
    ptr::copy_nonoverlapping(r.residuals.as_ptr(), buf, r.residuals.len());
    KehStatus::Ok
}

/// Copies per-class window votes (model class order) into `buf`.
///
/// # Safety
/// `result` must be live and `buf` must hold `cap` values.
#[no_mangle]
pub unsafe extern "C" fn keh_result_votes(
    result: *const KehResult,
    buf: *mut u32,
    cap: usize,
) -> KehStatus {
    let Some(r) = result.as_ref() else {
        return fail(KehStatus::NullPointer, "null result");
    };
    if buf.is_null() {
        return fail(KehStatus::NullPointer, "null buffer");
    }
    if cap < r.votes.len() {
        return fail(KehStatus::BufferTooSmall, "buffer smaller than class count");
    }
    ptr::copy_nonoverlapping(r.votes.as_ptr(), buf, r.votes.len());
    KehStatus::Ok
}

/// Releases a result. NULL is ignored.
///
/// # Safety
/// `result` must come from a classify call and not be used after.
#[no_mangle]
pub unsafe extern "C" fn keh_result_free(result: *mut KehResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
