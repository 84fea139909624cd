//! C ABI over the cepsonar toolkit.
//!
//! Every fallible function returns a [`CepsonarStatus`]; on failure the
//! thread's last error message is available from
//! [`cepsonar_last_error_message`] until the next failing call on the same
//! thread. Handles are opaque and owned by the caller, who must release
//! them with the matching `_free` function. Panics never cross the
//! boundary; they surface as `CEPSONAR_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use cepsonar::baseline::{tdoa_to_range, RangingGeometry};
use cepsonar::dsp::{cepstrogram, LifterWindow, SpectralParams};
use cepsonar::nn::Checkpoint;
use cepsonar::series::TimeSeries;
use cepsonar::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CepsonarStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    SignalTooShort = 4,
    OutOfGeometry = 5,
    NonFinite = 6,
    Format = 7,
    Io = 8,
    Panic = 9,
    Other = 10,
}

impl From<&Error> for CepsonarStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::InvalidConfig(_) | Error::EmptyInput(_) => Self::InvalidArgument,
            Error::ShapeMismatch(_) => Self::ShapeMismatch,
            Error::SignalTooShort { .. } => Self::SignalTooShort,
            Error::OutOfGeometry { .. } => Self::OutOfGeometry,
            Error::NonFinite(_) => Self::NonFinite,
            Error::Format(_) => Self::Format,
            Error::Io(_) => Self::Io,
            _ => Self::Other,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn fail(status: CepsonarStatus, message: impl Into<String>) -> CepsonarStatus {
    set_error(message.into());
    status
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), CepsonarStatus>) -> CepsonarStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CepsonarStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(CepsonarStatus::Panic, "internal panic"),
    }
}

fn check(r: cepsonar::Result<()>) -> Result<(), CepsonarStatus> {
    r.map_err(|e| fail(CepsonarStatus::from(&e), e.to_string()))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), CepsonarStatus> {
    if p.is_null() {
        Err(fail(CepsonarStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Message describing the last failure on this thread, or null when no
/// call has failed. The pointer stays valid until the next failing call.
#[no_mangle]
pub extern "C" fn cepsonar_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cepsonar_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// One network output.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CepsonarPrediction {
    pub presence_probability: f64,
    /// Metres.
    pub range: f64,
}

/// A trained network together with its feature normalization.
pub struct CepsonarModel {
    checkpoint: Checkpoint,
}

/// Loads a checkpoint written by `cepsonar train`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cepsonar_model_load(path: *const c_char, out: *mut *mut CepsonarModel) -> CepsonarStatus {
    guard(|| {
        non_null(path, "path")?;
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let path = CStr::from_ptr(path).to_str().map_err(|_| fail(CepsonarStatus::InvalidArgument, "path is not UTF-8"))?;
        let checkpoint = Checkpoint::load(Path::new(path)).map_err(|e| fail(CepsonarStatus::from(&e), format!("{path}: {e}")))?;
        *out = Box::into_raw(Box::new(CepsonarModel { checkpoint }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from [`cepsonar_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cepsonar_model_free(model: *mut CepsonarModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Feature height `m` and width `n` the model expects.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cepsonar_model_input_shape(model: *const CepsonarModel, m: *mut usize, n: *mut usize) -> CepsonarStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(m, "m")?;
        non_null(n, "n")?;
        let cfg = &(*model).checkpoint.model.config;
        *m = cfg.input_height;
        *n = cfg.input_width;
        Ok(())
    })
}

/// Predicts `count` raw (unnormalized) features laid out back to back,
/// each `m * n` values row-major, writing `count` predictions to `out`.
///
/// # Safety
/// `features` must hold `count * m * n` doubles and `out` room for `count`
/// predictions.
#[no_mangle]
pub unsafe extern "C" fn cepsonar_model_predict(
    model: *const CepsonarModel,
    features: *const f64,
    count: usize,
    out: *mut CepsonarPrediction,
) -> CepsonarStatus {
    guard(|| {
        non_null(model, "model")?;
        if count == 0 {
            return Ok(());
        }
        non_null(features, "features")?;
        non_null(out, "out")?;
        let ck = &(*model).checkpoint;
        let len = ck.model.config.input_len();
        let total = count
            .checked_mul(len)
            .ok_or_else(|| fail(CepsonarStatus::InvalidArgument, "feature count overflows"))?;
        let all = slice::from_raw_parts(features, total);
        let views: Vec<&[f64]> = all.chunks_exact(len).collect();
        let preds = ck.predict_raw(&views).map_err(|e| fail(CepsonarStatus::from(&e), e.to_string()))?;
        let out = slice::from_raw_parts_mut(out, count);
        for (o, p) in out.iter_mut().zip(preds) {
            *o = CepsonarPrediction { presence_probability: p.presence_probability, range: p.range_estimate };
        }
        Ok(())
    })
}

/// Turns audio segments into cepstrogram features with the ranging lifter.
pub struct CepsonarFeaturizer {
    sample_rate: f64,
    n: usize,
    lifter: LifterWindow,
    params: SpectralParams,
}

/// Creates a featurizer producing `m x n` features, where `m` follows from
/// the 84 us to 1.4 ms lifter at `sample_rate`. Spectra use Hann windows of
/// `window_length` samples with 50% overlap.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cepsonar_featurizer_new(
    sample_rate: f64,
    window_length: usize,
    n: usize,
    out: *mut *mut CepsonarFeaturizer,
) -> CepsonarStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        if !(sample_rate.is_finite() && sample_rate > 0.0) || n == 0 {
            return Err(fail(CepsonarStatus::InvalidArgument, "sample rate and n must be positive"));
        }
        let lifter = LifterWindow::ranging(sample_rate).map_err(|e| fail(CepsonarStatus::from(&e), e.to_string()))?;
        if lifter.high_index >= window_length {
            return Err(fail(
                CepsonarStatus::InvalidArgument,
                format!("window length must exceed the lifter's upper index {}", lifter.high_index),
            ));
        }
        let params = SpectralParams { window_length, ..SpectralParams::default() };
        *out = Box::into_raw(Box::new(CepsonarFeaturizer { sample_rate, n, lifter, params }));
        Ok(())
    })
}

/// Releases a featurizer. Null is ignored.
///
/// # Safety
/// `f` must come from [`cepsonar_featurizer_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cepsonar_featurizer_free(f: *mut CepsonarFeaturizer) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Feature height `m` and width `n`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cepsonar_featurizer_shape(f: *const CepsonarFeaturizer, m: *mut usize, n: *mut usize) -> CepsonarStatus {
    guard(|| {
        non_null(f, "featurizer")?;
        non_null(m, "m")?;
        non_null(n, "n")?;
        *m = (*f).lifter.len();
        *n = (*f).n;
        Ok(())
    })
}

/// Featurizes `len` samples into `out`, which must hold exactly
/// `out_len == m * n` doubles (row-major).
///
/// # Safety
/// `samples` must hold `len` doubles and `out` `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cepsonar_featurizer_compute(
    f: *const CepsonarFeaturizer,
    samples: *const f64,
    len: usize,
    out: *mut f64,
    out_len: usize,
) -> CepsonarStatus {
    guard(|| {
        non_null(f, "featurizer")?;
        non_null(samples, "samples")?;
        non_null(out, "out")?;
        let f = &*f;
        let expected = f.lifter.len() * f.n;
        if out_len != expected {
            return Err(fail(CepsonarStatus::ShapeMismatch, format!("output holds {out_len} values, feature has {expected}")));
        }
        let x = TimeSeries::new(slice::from_raw_parts(samples, len).to_vec(), f.sample_rate)
            .map_err(|e| fail(CepsonarStatus::from(&e), e.to_string()))?;
        let feature = cepstrogram(&x, f.n, f.lifter, &f.params).map_err(|e| fail(CepsonarStatus::from(&e), e.to_string()))?;
        slice::from_raw_parts_mut(out, out_len).copy_from_slice(&feature.values);
        Ok(())
    })
}

fn geometry(source_depth: f64, receiver_depth: f64, sound_speed: f64) -> Result<RangingGeometry, CepsonarStatus> {
    let g = RangingGeometry { source_depth, receiver_depth, sound_speed };
    check(g.validate())?;
    Ok(g)
}

/// Horizontal range (m) at which the surface-minus-direct delay equals
/// `tdoa` seconds.
///
/// # Safety
/// `range` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cepsonar_tdoa_to_range(
    tdoa: f64,
    source_depth: f64,
    receiver_depth: f64,
    sound_speed: f64,
    range: *mut f64,
) -> CepsonarStatus {
    guard(|| {
        non_null(range, "range")?;
        let g = geometry(source_depth, receiver_depth, sound_speed)?;
        *range = tdoa_to_range(tdoa, &g).map_err(|e| fail(CepsonarStatus::from(&e), e.to_string()))?;
        Ok(())
    })
}

/// Surface-minus-direct delay (s) at horizontal range `range` metres.
///
/// # Safety
/// `tdoa` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cepsonar_range_to_tdoa(
    range: f64,
    source_depth: f64,
    receiver_depth: f64,
    sound_speed: f64,
    tdoa: *mut f64,
) -> CepsonarStatus {
    guard(|| {
        non_null(tdoa, "tdoa")?;
        if !(range.is_finite() && range >= 0.0) {
            return Err(fail(CepsonarStatus::InvalidArgument, format!("range {range} must be finite and non-negative")));
        }
        *tdoa = geometry(source_depth, receiver_depth, sound_speed)?.tdoa(range);
        Ok(())
    })
}
