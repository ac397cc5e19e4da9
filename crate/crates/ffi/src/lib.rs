//! C ABI over rqp-core.
//!
//! Every fallible function returns an [`RqpStatus`] and writes its result
//! through an out-pointer. On failure, [`rqp_last_error_message`] describes
//! the error on the calling thread. Models and predictors are opaque handles
//! released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use rqp_core::entropy::{self, CauchyParams, Qstep, Truncation};
use rqp_core::eval::NetPredictor;
use rqp_core::ingest::load_item;
use rqp_core::model::{self, ModelForm, ModelParams, ModelSpec, OperationalPoint, RqpCurve, RqpSample};
use rqp_core::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RqpStatus {
    Ok = 0,
    NullPointer = 1,
    /// Argument outside the function's domain, or an inconsistent configuration.
    InvalidArgument = 2,
    /// Fewer distinct informative samples than model parameters.
    UnderDetermined = 3,
    /// Ill-conditioned or degenerate least-squares problem.
    DegenerateFit = 4,
    /// The quadratic model never reaches the requested QP.
    NoRealRoot = 5,
    /// Malformed file or document.
    Parse = 6,
    Io = 7,
    /// Output buffer too small; the required length is still reported.
    BufferTooSmall = 8,
    /// A Rust panic was caught at the boundary.
    Internal = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RqpModelForm {
    Linear = 0,
    Quadratic = 1,
}

/// Opaque fitted or user-supplied R-QP model.
pub struct RqpModel(ModelParams);

/// Opaque trained regressor loaded from a checkpoint.
pub struct RqpPredictor(NetPredictor);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> RqpStatus {
    match e {
        Error::UnderDetermined { .. } => RqpStatus::UnderDetermined,
        Error::DegenerateFit(_) | Error::DegenerateLabels { .. } => RqpStatus::DegenerateFit,
        Error::NoRealRoot { .. } => RqpStatus::NoRealRoot,
        Error::Schema(_) | Error::Json(_) | Error::Tiling(_) | Error::Unsupported(_) => RqpStatus::Parse,
        Error::Io { .. } => RqpStatus::Io,
        _ => RqpStatus::InvalidArgument,
    }
}

/// Runs `f`, recording any error or panic for `rqp_last_error_message`.
fn guard<F: FnOnce() -> Result<(), (RqpStatus, String)>>(f: F) -> RqpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            RqpStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            RqpStatus::Internal
        }
    }
}

fn core_err(e: Error) -> (RqpStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (RqpStatus, String) {
    (RqpStatus::NullPointer, format!("{what} is null"))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), (RqpStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, (RqpStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| (RqpStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], (RqpStatus, String)> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

fn form(f: RqpModelForm) -> ModelForm {
    match f {
        RqpModelForm::Linear => ModelForm::Linear,
        RqpModelForm::Quadratic => ModelForm::Quadratic,
    }
}

fn spec(f: RqpModelForm, fastened: bool, qp0: f64, r0: f64) -> Result<ModelSpec, (RqpStatus, String)> {
    if fastened {
        let p = OperationalPoint::new(qp0, r0).map_err(core_err)?;
        Ok(ModelSpec::fastened(form(f), p))
    } else {
        Ok(ModelSpec::free(form(f)))
    }
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next rqp call on the same thread.
#[no_mangle]
pub extern "C" fn rqp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// QP = 6 log2(Q) + 4.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rqp_qstep_to_qp(qstep: f64, out: *mut f64) -> RqpStatus {
    guard(|| write_out(out, entropy::qstep_to_qp(qstep).map_err(core_err)?))
}

/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rqp_qp_to_qstep(qp: f64, out: *mut f64) -> RqpStatus {
    guard(|| write_out(out, entropy::qp_to_qstep(qp).map_err(core_err)?))
}

/// Entropy in bits of Cauchy(0, gamma) coefficients quantized with step
/// `qstep`. `truncation == 0` selects adaptive truncation; otherwise bins
/// `1..=truncation` on each side are summed.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rqp_cauchy_entropy(
    gamma: f64,
    qstep: f64,
    include_zero_bin: bool,
    truncation: u32,
    out: *mut f64,
) -> RqpStatus {
    guard(|| {
        let t = if truncation == 0 {
            Truncation::Adaptive
        } else {
            Truncation::Fixed(truncation)
        };
        let params = CauchyParams::new(gamma)
            .with_zero_bin(include_zero_bin)
            .with_truncation(t);
        let q = Qstep::new(qstep).map_err(core_err)?;
        write_out(out, entropy::entropy(&params, q).map_err(core_err)?)
    })
}

/// Least-squares fit over `n` (qp, rate) samples with increasing QP. `qp0`
/// and `r0` are ignored for free models.
///
/// # Safety
/// `qps` and `rates` must point to `n` readable doubles; `out` must be valid
/// for a write. The returned handle must be released with `rqp_model_free`.
#[no_mangle]
pub unsafe extern "C" fn rqp_model_fit(
    form: RqpModelForm,
    fastened: bool,
    qp0: f64,
    r0: f64,
    qps: *const f64,
    rates: *const f64,
    n: usize,
    out: *mut *mut RqpModel,
) -> RqpStatus {
    guard(|| {
        let qps = slice_arg(qps, n, "qps")?;
        let rates = slice_arg(rates, n, "rates")?;
        let samples = qps
            .iter()
            .zip(rates)
            .map(|(&qp, &rate)| RqpSample { qp, rate })
            .collect();
        let curve = RqpCurve::new(samples).map_err(core_err)?;
        let params = model::fit(spec(form, fastened, qp0, r0)?, &curve).map_err(core_err)?;
        write_out(out, Box::into_raw(Box::new(RqpModel(params))))
    })
}

/// Model from known coefficients.
///
/// # Safety
/// `coeffs` must point to `n` readable doubles; `out` must be valid for a
/// write. The returned handle must be released with `rqp_model_free`.
#[no_mangle]
pub unsafe extern "C" fn rqp_model_new(
    form: RqpModelForm,
    fastened: bool,
    qp0: f64,
    r0: f64,
    coeffs: *const f64,
    n: usize,
    out: *mut *mut RqpModel,
) -> RqpStatus {
    guard(|| {
        let coeffs = slice_arg(coeffs, n, "coeffs")?.to_vec();
        let params = ModelParams::new(spec(form, fastened, qp0, r0)?, coeffs).map_err(core_err)?;
        write_out(out, Box::into_raw(Box::new(RqpModel(params))))
    })
}

/// Copies the coefficients into `out` (capacity `cap`) and stores their
/// count in `len`. Returns `BufferTooSmall` if `cap < *len`.
///
/// # Safety
/// `model` must be a live handle, `out` writable for `cap` doubles and `len`
/// valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rqp_model_coeffs(model: *const RqpModel, out: *mut f64, cap: usize, len: *mut usize) -> RqpStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let c = &m.0.coeffs;
        write_out(len, c.len())?;
        if cap < c.len() {
            return Err((
                RqpStatus::BufferTooSmall,
                format!("need room for {} coefficients, got {cap}", c.len()),
            ));
        }
        if out.is_null() {
            return Err(null("output buffer"));
        }
        ptr::copy_nonoverlapping(c.as_ptr(), out, c.len());
        Ok(())
    })
}

/// Rate (bits) at which the model reaches `qp`.
///
/// # Safety
/// `model` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rqp_model_predict_rate(model: *const RqpModel, qp: f64, out: *mut f64) -> RqpStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        write_out(out, m.0.predict_rate(qp).map_err(core_err)?)
    })
}

/// QP the model assigns to `rate` bits.
///
/// # Safety
/// `model` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rqp_model_qp(model: *const RqpModel, rate: f64, out: *mut f64) -> RqpStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        write_out(out, m.0.model_qp(rate).map_err(core_err)?)
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rqp_model_free(model: *mut RqpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Signed relative error in percent, `(actual - predicted) / actual * 100`.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rqp_relative_error(actual: f64, predicted: f64, out: *mut f64) -> RqpStatus {
    guard(|| write_out(out, model::relative_error(actual, predicted).map_err(core_err)?))
}

/// Loads a checkpoint written by `rqp train`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for a write. The
/// returned handle must be released with `rqp_predictor_free`.
#[no_mangle]
pub unsafe extern "C" fn rqp_predictor_load(path: *const c_char, out: *mut *mut RqpPredictor) -> RqpStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        let p = NetPredictor::load(path).map_err(core_err)?;
        write_out(out, Box::into_raw(Box::new(RqpPredictor(p))))
    })
}

/// Predicts the model of one frame (PGM plus sidecar) and returns it as a new
/// model handle.
///
/// # Safety
/// `predictor` must be a live handle, both paths NUL-terminated strings and
/// `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rqp_predictor_model(
    predictor: *const RqpPredictor,
    frame_path: *const c_char,
    sidecar_path: *const c_char,
    out: *mut *mut RqpModel,
) -> RqpStatus {
    guard(|| {
        let p = predictor.as_ref().ok_or_else(|| null("predictor"))?;
        let item = load_item(path_arg(frame_path, "frame_path")?, path_arg(sidecar_path, "sidecar_path")?)
            .map_err(core_err)?;
        let params = p.0.params(&item).map_err(core_err)?;
        write_out(out, Box::into_raw(Box::new(RqpModel(params))))
    })
}

/// # Safety
/// `predictor` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rqp_predictor_free(predictor: *mut RqpPredictor) {
    if !predictor.is_null() {
        drop(Box::from_raw(predictor));
    }
}
