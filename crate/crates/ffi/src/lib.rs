//! C ABI for the mcmcbench engine.
//!
//! Models and chains are opaque handles created and destroyed through this
//! interface. Every fallible call returns an [`McbStatus`]; on failure the
//! message is available from [`mcb_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use mcmcbench::datagen::{Dataset, GroundTruth};
use mcmcbench::diagnostics::{default_subset, ess_report, fit_report};
use mcmcbench::harness::{run, ExperimentConfig, ReportRow};
use mcmcbench::model::{Family, ModelInstance, Prior};
use mcmcbench::samplers::{sample, Backend, Chain, SamplerConfig};
use mcmcbench::Error;
use nalgebra::DMatrix;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidString = 2,
    InvalidParameter = 3,
    Unsupported = 4,
    Shape = 5,
    Config = 6,
    DegenerateSeries = 7,
    SliceFailure = 8,
    Empty = 9,
    Io = 10,
    Format = 11,
    Panic = 99,
}

/// A model bound to its data.
pub struct McbModel {
    inner: ModelInstance,
}

/// A finished chain with its column names.
pub struct McbChain {
    inner: Chain,
    names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

enum Failure {
    Null(&'static str),
    Utf8(&'static str),
    Engine(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Engine(e)
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> McbStatus {
    match e {
        Error::InvalidParameter(_) => McbStatus::InvalidParameter,
        Error::Unsupported(_) => McbStatus::Unsupported,
        Error::Shape { .. } => McbStatus::Shape,
        Error::Config(_) => McbStatus::Config,
        Error::DegenerateSeries(_) => McbStatus::DegenerateSeries,
        Error::Slice { .. } => McbStatus::SliceFailure,
        Error::Empty(_) => McbStatus::Empty,
        Error::Io(_) => McbStatus::Io,
        Error::Csv(_) | Error::Json(_) => McbStatus::Format,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> McbStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => McbStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            McbStatus::NullPointer
        }
        Ok(Err(Failure::Utf8(what))) => {
            set_error(format!("invalid UTF-8 string: {what}"));
            McbStatus::InvalidString
        }
        Ok(Err(Failure::Engine(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            McbStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Utf8(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn put<T>(out: *mut T, v: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(v);
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn mcb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mcb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Simulate a dataset with default settings and bind it to `prior`.
///
/// `p_or_h` is the number of coefficients for regressions and the number
/// of components for mixtures.
///
/// # Safety
/// `prior` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mcb_model_simulate(
    prior: *const c_char,
    n: usize,
    p_or_h: usize,
    seed: u64,
    out: *mut *mut McbModel,
) -> McbStatus {
    guard(|| {
        let prior: Prior = text(prior, "prior")?.parse()?;
        let mut cfg = ExperimentConfig { n, seed, ..ExperimentConfig::new(prior) };
        if prior.family() == Family::MM {
            cfg.h = p_or_h;
        } else {
            cfg.p = p_or_h;
        }
        let data = Arc::new(cfg.dataset(0)?);
        let model = ModelInstance::builder(prior, data).components(cfg.h).build()?;
        put(out, Box::into_raw(Box::new(McbModel { inner: model })), "out")
    })
}

/// Bind user data to `prior`.
///
/// `x` is row-major `n x p` and may be NULL when `p == 0`. `delta` holds
/// event indicators (1 observed, 0 censored) for AFT models and is NULL
/// otherwise. `h` is the number of mixture components and ignored for
/// regressions.
///
/// # Safety
/// Array arguments must point to at least the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn mcb_model_from_data(
    prior: *const c_char,
    y: *const f64,
    n: usize,
    x: *const f64,
    p: usize,
    delta: *const u8,
    h: usize,
    out: *mut *mut McbModel,
) -> McbStatus {
    guard(|| {
        let prior: Prior = text(prior, "prior")?.parse()?;
        let y = slice(y, n, "y")?.to_vec();
        let x = DMatrix::from_row_slice(n, p, slice(x, n * p, "x")?);
        let delta = if delta.is_null() {
            None
        } else {
            Some(std::slice::from_raw_parts(delta, n).iter().map(|&d| d != 0).collect())
        };
        let data = Arc::new(Dataset { y, x, delta, truth: GroundTruth::default() });
        let mut b = ModelInstance::builder(prior, data);
        if prior.family() == Family::MM {
            b = b.components(h);
        }
        let model = b.build()?;
        put(out, Box::into_raw(Box::new(McbModel { inner: model })), "out")
    })
}

/// Release a model. NULL is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mcb_model_free(model: *mut McbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Dimension of the unconstrained parameter vector.
///
/// # Safety
/// `model` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn mcb_model_dim(model: *const McbModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim())
}

/// Log posterior at unconstrained point `u` of length `len`.
///
/// # Safety
/// `u` must hold `len` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mcb_model_log_posterior(
    model: *const McbModel,
    u: *const f64,
    len: usize,
    out: *mut f64,
) -> McbStatus {
    guard(|| {
        let m = &handle(model, "model")?.inner;
        let theta = m.param_vec(slice(u, len, "u")?.to_vec())?;
        put(out, m.log_posterior(&theta)?, "out")
    })
}

/// Gradient of the log posterior at `u`, written to `grad` (both of length `len`).
///
/// # Safety
/// `u` and `grad` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn mcb_model_gradient(
    model: *const McbModel,
    u: *const f64,
    len: usize,
    grad: *mut f64,
) -> McbStatus {
    guard(|| {
        let m = &handle(model, "model")?.inner;
        let theta = m.param_vec(slice(u, len, "u")?.to_vec())?;
        let g = m.grad_log_posterior(&theta)?;
        if grad.is_null() {
            return Err(Failure::Null("grad"));
        }
        std::slice::from_raw_parts_mut(grad, len).copy_from_slice(&g);
        Ok(())
    })
}

/// Run one chain. `backend` is `gibbs`, `nuts` or `rwmh`.
///
/// # Safety
/// `backend` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mcb_sample(
    model: *const McbModel,
    backend: *const c_char,
    n_iter: usize,
    n_burn: usize,
    n_thin: usize,
    seed: u64,
    out: *mut *mut McbChain,
) -> McbStatus {
    guard(|| {
        let m = &handle(model, "model")?.inner;
        let backend: Backend = text(backend, "backend")?.parse()?;
        let cfg = SamplerConfig { n_thin, ..SamplerConfig::new(backend, n_iter, n_burn, seed) };
        let chain = sample(m, &cfg)?;
        let names = chain.names.iter().map(|n| CString::new(n.as_str()).unwrap_or_default()).collect();
        put(out, Box::into_raw(Box::new(McbChain { inner: chain, names })), "out")
    })
}

/// Release a chain. NULL is ignored.
///
/// # Safety
/// `chain` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mcb_chain_free(chain: *mut McbChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// Number of retained draws, or 0 for NULL.
///
/// # Safety
/// `chain` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn mcb_chain_draws(chain: *const McbChain) -> usize {
    chain.as_ref().map_or(0, |c| c.inner.n_draws())
}

/// Number of monitored columns, or 0 for NULL.
///
/// # Safety
/// `chain` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn mcb_chain_dim(chain: *const McbChain) -> usize {
    chain.as_ref().map_or(0, |c| c.inner.dim())
}

/// Name of column `j`, owned by the chain, or NULL when out of range.
///
/// # Safety
/// `chain` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn mcb_chain_column_name(chain: *const McbChain, j: usize) -> *const c_char {
    chain.as_ref().and_then(|c| c.names.get(j)).map_or(ptr::null(), |s| s.as_ptr())
}

/// Copy the draws, row-major `draws x dim`, into `buf` of length `len`.
///
/// # Safety
/// `buf` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn mcb_chain_samples(chain: *const McbChain, buf: *mut f64, len: usize) -> McbStatus {
    guard(|| {
        let c = &handle(chain, "chain")?.inner;
        let need = c.n_draws() * c.dim();
        if len != need {
            return Err(Error::Shape { expected: need, got: len }.into());
        }
        if buf.is_null() {
            return Err(Failure::Null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(&c.samples);
        Ok(())
    })
}

/// Sampling wall-clock time in seconds, or NaN for NULL.
///
/// # Safety
/// `chain` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn mcb_chain_seconds(chain: *const McbChain) -> f64 {
    chain.as_ref().map_or(f64::NAN, |c| c.inner.t_s)
}

/// Headline diagnostics of a chain fitted to `model`: mean E over the
/// default parameter subset, LPML and WAIC.
///
/// # Safety
/// Output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn mcb_chain_summary(
    model: *const McbModel,
    chain: *const McbChain,
    mean_e: *mut f64,
    lpml: *mut f64,
    waic: *mut f64,
) -> McbStatus {
    guard(|| {
        let m = &handle(model, "model")?.inner;
        let c = &handle(chain, "chain")?.inner;
        let e = ess_report(c, default_subset(m.family()))?;
        let fit = fit_report(m, c)?;
        put(mean_e, e.mean_e, "mean_e")?;
        put(lpml, fit.lpml, "lpml")?;
        put(waic, fit.waic, "waic")
    })
}

/// Run an experiment described by a JSON config and return the report rows
/// as a JSON array. Free the result with [`mcb_string_free`].
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mcb_run_experiment_json(config_json: *const c_char, out: *mut *mut c_char) -> McbStatus {
    guard(|| {
        let cfg: ExperimentConfig = serde_json::from_str(text(config_json, "config_json")?).map_err(Error::from)?;
        cfg.validate()?;
        let rows: Vec<ReportRow> = run(&cfg)?.iter().map(ReportRow::from).collect();
        let s = serde_json::to_string(&rows).map_err(Error::from)?;
        put(out, CString::new(s).unwrap_or_default().into_raw(), "out")
    })
}

/// Release a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mcb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
