//! C ABI over the forecasting library.
//!
//! Every fallible function returns a [`TcStatus`]; on failure the message is
//! available from [`tc_last_error_message`] on the same thread. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tokcast::baselines::{forecast_baseline, Baseline, BaselineConfig};
use tokcast::metrics::{crps, dm_test, mae, rmse, DmLoss};
use tokcast::model::{sample_forecast, Checkpoint, SampleOptions};
use tokcast::series::default_quantiles;
use tokcast::{point_forecast, Error, ForecastTask, QuantileForecast};

#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcStatus {
    TC_OK = 0,
    TC_NULL_POINTER = 1,
    TC_INVALID_ARGUMENT = 2,
    /// Input rejected by the library (bad config, short series, ...).
    TC_VALIDATION = 3,
    /// I/O or numerical failure.
    TC_RUNTIME = 4,
    TC_PANIC = 5,
}

/// Squared or absolute loss for [`tc_dm_test`].
#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcLoss {
    TC_LOSS_SQUARED = 0,
    TC_LOSS_ABSOLUTE = 1,
}

/// A loaded checkpoint.
pub struct TcModel {
    checkpoint: Checkpoint,
}

/// Quantile forecast: one row per level, `horizon` values each.
pub struct TcForecast {
    inner: QuantileForecast,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Fail(TcStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = if e.is_validation() {
            TcStatus::TC_VALIDATION
        } else {
            TcStatus::TC_RUNTIME
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(TcStatus::TC_NULL_POINTER, format!("{what} is NULL"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            TcStatus::TC_OK
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TcStatus::TC_PANIC
        }
    }
}

unsafe fn doubles<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(TcStatus::TC_INVALID_ARGUMENT, format!("{what} is not UTF-8")))
}

/// NULL `levels` selects the default grid 0.1, 0.2, ..., 0.9.
unsafe fn task(horizon: usize, context_len: usize, levels: *const f64, n_levels: usize) -> Result<ForecastTask, Fail> {
    let grid = if levels.is_null() {
        default_quantiles()
    } else {
        doubles(levels, n_levels, "levels")?.to_vec()
    };
    Ok(ForecastTask::with_quantiles(horizon, context_len.max(1), grid)?)
}

unsafe fn emit(out: *mut *mut TcForecast, qf: QuantileForecast) {
    *out = Box::into_raw(Box::new(TcForecast { inner: qf }));
}

/// Load a checkpoint file. On success `*out` owns a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tc_model_load(path: *const c_char, out: *mut *mut TcModel) -> TcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let checkpoint = Checkpoint::load(text(path, "path")?)?;
        *out = Box::into_raw(Box::new(TcModel { checkpoint }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`tc_model_load`] and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn tc_model_free(model: *mut TcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Largest horizon the model can decode.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tc_model_horizon_limit(model: *const TcModel) -> usize {
    model.as_ref().map_or(0, |m| m.checkpoint.config.horizon_len)
}

/// Sample `samples` paths from the model and summarise them at `levels`
/// (NULL for the default grid). `temperature` 0 decodes greedily.
///
/// # Safety
/// `context` must hold `len` doubles, `levels` `n_levels` doubles (or be NULL),
/// and `out` must be a valid pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn tc_forecast_model(
    model: *const TcModel,
    context: *const f64,
    len: usize,
    horizon: usize,
    levels: *const f64,
    n_levels: usize,
    samples: usize,
    temperature: f64,
    seed: u64,
    out: *mut *mut TcForecast,
) -> TcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let context = doubles(context, len, "context")?;
        let task = task(horizon, len, levels, n_levels)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let opts = SampleOptions { samples, temperature };
        let ck = &model.checkpoint;
        emit(out, sample_forecast(&ck.params, &ck.config, context, &task, opts, &mut rng)?);
        Ok(())
    })
}

/// Forecast with a statistical baseline: "snm", "csba", "npts" or "ets_lite",
/// using default baseline settings (season 24).
///
/// # Safety
/// As for [`tc_forecast_model`]; `baseline` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tc_forecast_baseline(
    baseline: *const c_char,
    context: *const f64,
    len: usize,
    horizon: usize,
    levels: *const f64,
    n_levels: usize,
    seed: u64,
    out: *mut *mut TcForecast,
) -> TcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let baseline: Baseline = text(baseline, "baseline")?
            .parse()
            .map_err(|e: Error| Fail(TcStatus::TC_INVALID_ARGUMENT, e.to_string()))?;
        let context = doubles(context, len, "context")?;
        let task = task(horizon, len, levels, n_levels)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        emit(out, forecast_baseline(baseline, context, &task, &BaselineConfig::default(), &mut rng)?);
        Ok(())
    })
}

/// # Safety
/// `forecast` must come from a `tc_forecast_*` call and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn tc_forecast_free(forecast: *mut TcForecast) {
    if !forecast.is_null() {
        drop(Box::from_raw(forecast));
    }
}

/// # Safety
/// `forecast` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tc_forecast_horizon(forecast: *const TcForecast) -> usize {
    forecast.as_ref().map_or(0, |f| f.inner.horizon())
}

/// # Safety
/// `forecast` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tc_forecast_level_count(forecast: *const TcForecast) -> usize {
    forecast.as_ref().map_or(0, |f| f.inner.levels.len())
}

/// Copy the quantile levels into `out`, which must have room for `len` values.
///
/// # Safety
/// `out` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tc_forecast_levels(forecast: *const TcForecast, out: *mut f64, len: usize) -> TcStatus {
    guard(|| {
        let f = forecast.as_ref().ok_or_else(|| null("forecast"))?;
        copy_out(&f.inner.levels, out, len)
    })
}

/// Copy the row for level index `level` (`horizon` values).
///
/// # Safety
/// `out` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tc_forecast_values(forecast: *const TcForecast, level: usize, out: *mut f64, len: usize) -> TcStatus {
    guard(|| {
        let f = forecast.as_ref().ok_or_else(|| null("forecast"))?;
        let row = f
            .inner
            .values
            .get(level)
            .ok_or_else(|| Fail(TcStatus::TC_INVALID_ARGUMENT, format!("level index {level} out of range")))?;
        copy_out(row, out, len)
    })
}

/// Copy the point forecast (the median row).
///
/// # Safety
/// `out` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tc_forecast_point(forecast: *const TcForecast, out: *mut f64, len: usize) -> TcStatus {
    guard(|| {
        let f = forecast.as_ref().ok_or_else(|| null("forecast"))?;
        copy_out(&point_forecast(&f.inner), out, len)
    })
}

unsafe fn copy_out(src: &[f64], out: *mut f64, len: usize) -> Result<(), Fail> {
    if len < src.len() {
        return Err(Fail(
            TcStatus::TC_INVALID_ARGUMENT,
            format!("buffer holds {len} values, need {}", src.len()),
        ));
    }
    if out.is_null() {
        return Err(null("out"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

/// CRPS of `forecast` against `len` actual values.
///
/// # Safety
/// `actual` must hold `len` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn tc_metric_crps(actual: *const f64, len: usize, forecast: *const TcForecast, out: *mut f64) -> TcStatus {
    guard(|| {
        let f = forecast.as_ref().ok_or_else(|| null("forecast"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = crps(doubles(actual, len, "actual")?, &f.inner)?;
        Ok(())
    })
}

/// # Safety
/// `actual` and `predicted` must hold `len` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn tc_metric_rmse(actual: *const f64, predicted: *const f64, len: usize, out: *mut f64) -> TcStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = rmse(doubles(actual, len, "actual")?, doubles(predicted, len, "predicted")?)?;
        Ok(())
    })
}

/// # Safety
/// `actual` and `predicted` must hold `len` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn tc_metric_mae(actual: *const f64, predicted: *const f64, len: usize, out: *mut f64) -> TcStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = mae(doubles(actual, len, "actual")?, doubles(predicted, len, "predicted")?)?;
        Ok(())
    })
}

/// Diebold-Mariano test of two `len`-long error series at horizon `h`.
/// A positive statistic means the first model has the larger loss.
///
/// # Safety
/// `e1` and `e2` must hold `len` doubles; `statistic`, `p_value` and `reject` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn tc_dm_test(
    e1: *const f64,
    e2: *const f64,
    len: usize,
    h: usize,
    loss: TcLoss,
    statistic: *mut f64,
    p_value: *mut f64,
    reject: *mut bool,
) -> TcStatus {
    guard(|| {
        let loss = match loss {
            TcLoss::TC_LOSS_SQUARED => DmLoss::Squared,
            TcLoss::TC_LOSS_ABSOLUTE => DmLoss::Absolute,
        };
        let r = dm_test(doubles(e1, len, "e1")?, doubles(e2, len, "e2")?, h, loss)?;
        *statistic.as_mut().ok_or_else(|| null("statistic"))? = r.statistic;
        *p_value.as_mut().ok_or_else(|| null("p_value"))? = r.p_value;
        *reject.as_mut().ok_or_else(|| null("reject"))? = r.reject;
        Ok(())
    })
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next library call on the same thread.
#[no_mangle]
pub extern "C" fn tc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |m| m.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
