//! C interface to `ebmon`.
//!
//! Every function returns an [`EbmonStatus`]. On failure the message is
//! available from [`ebmon_last_error`] on the same thread. Objects are
//! opaque handles released with their `_free` function; output arrays are
//! caller-allocated with the documented length.
//!
//! Missing panel cells are passed as NaN.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ebmon::longitudinal::{self, extrapolate, predict_next, Panel};
use ebmon::{ranking, univariate, CrudeEffect, Error, ExtrapolationPolicy, LongitudinalModel, PriorEstimate, Structure};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EbmonStatus {
    Ok = 0,
    InvalidInput = 2,
    Numerical = 3,
    NullPointer = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EbmonEstimator {
    Mle = 0,
    Moment = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EbmonStructure {
    Unstructured = 0,
    CompoundSymmetry = 1,
    Ar1 = 2,
    RandomCoefficients = 3,
}

impl From<EbmonStructure> for Structure {
    fn from(s: EbmonStructure) -> Self {
        match s {
            EbmonStructure::Unstructured => Structure::Unstructured,
            EbmonStructure::CompoundSymmetry => Structure::CompoundSymmetry,
            EbmonStructure::Ar1 => Structure::Ar1,
            EbmonStructure::RandomCoefficients => Structure::RandomCoefficients,
        }
    }
}

/// Fitted single-year prior together with the data it was fitted to.
pub struct EbmonPrior {
    crudes: Vec<CrudeEffect>,
    prior: PriorEstimate,
}

/// Longitudinal model (fitted or built from parameters).
pub struct EbmonModel {
    model: LongitudinalModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(EbmonStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = if e.is_numerical() { EbmonStatus::Numerical } else { EbmonStatus::InvalidInput };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(EbmonStatus::InvalidInput, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EbmonStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EbmonStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            EbmonStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure(EbmonStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_mut<'a, T>(p: *mut T, n: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure(EbmonStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure(EbmonStatus::NullPointer, format!("{what} is null")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(EbmonStatus::NullPointer, format!("{what} is null")))
}

unsafe fn string(p: *const c_char, what: &str) -> Result<String, Failure> {
    if p.is_null() {
        return Err(Failure(EbmonStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_string)
        .map_err(|_| invalid(format!("{what} is not UTF-8")))
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ebmon_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Crude effect `(O - E) / var` and its variance `1 / var` of one centre-year.
///
/// # Safety
/// `theta_hat` and `s2` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ebmon_crude_effect(
    observed: f64,
    expected: f64,
    information: f64,
    theta_hat: *mut f64,
    s2: *mut f64,
) -> EbmonStatus {
    guard(|| {
        let (t, s) = (out(theta_hat, "theta_hat")?, out(s2, "s2")?);
        if !(information > 0.0) || !observed.is_finite() || !expected.is_finite() || !information.is_finite() {
            return Err(invalid("need finite counts and positive information"));
        }
        *t = (observed - expected) / information;
        *s = 1.0 / information;
        Ok(())
    })
}

/// Fits `N(mu, tau2)` to `n` crude effects.
///
/// # Safety
/// `theta_hat` and `s2` must point to `n` doubles; `out_prior` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn ebmon_prior_fit(
    theta_hat: *const f64,
    s2: *const f64,
    n: usize,
    estimator: EbmonEstimator,
    out_prior: *mut *mut EbmonPrior,
) -> EbmonStatus {
    guard(|| {
        let slot = out(out_prior, "out_prior")?;
        *slot = ptr::null_mut();
        let (t, s) = (slice(theta_hat, n, "theta_hat")?, slice(s2, n, "s2")?);
        let crudes: Vec<CrudeEffect> = (0..n)
            .map(|i| CrudeEffect {
                centre_id: i.to_string(),
                year: 0,
                theta_hat: t[i],
                s2: s[i],
            })
            .collect();
        let method = match estimator {
            EbmonEstimator::Mle => univariate::PriorMethod::MleEm,
            EbmonEstimator::Moment => univariate::PriorMethod::Moment,
        };
        let prior = univariate::fit_prior(&crudes, method)?;
        *slot = Box::into_raw(Box::new(EbmonPrior { crudes, prior }));
        Ok(())
    })
}

/// Prior mean, variance, marginal log-likelihood and proportion of true
/// variation. Any output pointer may be NULL.
///
/// # Safety
/// `prior` must come from [`ebmon_prior_fit`]; non-null outputs must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn ebmon_prior_summary(
    prior: *const EbmonPrior,
    mu: *mut f64,
    tau2: *mut f64,
    log_likelihood: *mut f64,
    rho: *mut f64,
) -> EbmonStatus {
    guard(|| {
        let p = handle(prior, "prior")?;
        if let Some(v) = mu.as_mut() {
            *v = p.prior.mu;
        }
        if let Some(v) = tau2.as_mut() {
            *v = p.prior.tau2;
        }
        if let Some(v) = log_likelihood.as_mut() {
            *v = p.prior.log_likelihood;
        }
        if let Some(v) = rho.as_mut() {
            *v = univariate::proportion_true_variation(&p.prior, &p.crudes);
        }
        Ok(())
    })
}

/// Posterior mean, variance and shrinkage of every centre (`n` entries each).
///
/// # Safety
/// Outputs must point to `n` writable doubles, `n` being the fitted count.
#[no_mangle]
pub unsafe extern "C" fn ebmon_prior_posteriors(
    prior: *const EbmonPrior,
    n: usize,
    ebe: *mut f64,
    pv: *mut f64,
    shrinkage: *mut f64,
) -> EbmonStatus {
    guard(|| {
        let p = handle(prior, "prior")?;
        if n != p.crudes.len() {
            return Err(invalid(format!("prior was fitted to {} centres, not {n}", p.crudes.len())));
        }
        let (e, v, w) = (slice_mut(ebe, n, "ebe")?, slice_mut(pv, n, "pv")?, slice_mut(shrinkage, n, "shrinkage")?);
        for (i, post) in univariate::posteriors(&p.crudes, &p.prior).into_iter().enumerate() {
            e[i] = post.ebe;
            v[i] = post.pv;
            w[i] = post.shrinkage;
        }
        Ok(())
    })
}

/// Expected rank, its percentile, the expected percentile (`n` entries each)
/// and the rankability.
///
/// # Safety
/// Array outputs must point to `n` writable doubles; `ra` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ebmon_prior_ranking(
    prior: *const EbmonPrior,
    n: usize,
    er: *mut f64,
    pcer: *mut f64,
    epc: *mut f64,
    ra: *mut f64,
) -> EbmonStatus {
    guard(|| {
        let p = handle(prior, "prior")?;
        if n != p.crudes.len() {
            return Err(invalid(format!("prior was fitted to {} centres, not {n}", p.crudes.len())));
        }
        let (a, b, c) = (slice_mut(er, n, "er")?, slice_mut(pcer, n, "pcer")?, slice_mut(epc, n, "epc")?);
        let ra = out(ra, "ra")?;
        let posts = univariate::posteriors(&p.crudes, &p.prior);
        let theta: Vec<f64> = p.crudes.iter().map(|c| c.theta_hat).collect();
        let (rows, report) = ranking::rank_table(&theta, &posts, p.prior.mu, p.prior.tau2);
        for (i, r) in rows.iter().enumerate() {
            a[i] = r.er;
            b[i] = r.pcer;
            c[i] = r.epc;
        }
        *ra = report.ra;
        Ok(())
    })
}

/// # Safety
/// `prior` must come from [`ebmon_prior_fit`] (or be NULL) and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn ebmon_prior_free(prior: *mut EbmonPrior) {
    if !prior.is_null() {
        drop(Box::from_raw(prior));
    }
}

unsafe fn panel_from(
    theta_hat: *const f64,
    s2: *const f64,
    years: *const i32,
    n_centres: usize,
    n_years: usize,
) -> Result<Panel, Failure> {
    let cells = n_centres
        .checked_mul(n_years)
        .ok_or_else(|| invalid("panel dimensions overflow"))?;
    let t = slice(theta_hat, cells, "theta_hat")?.to_vec();
    let s = slice(s2, cells, "s2")?.to_vec();
    let y = slice(years, n_years, "years")?.to_vec();
    let observed: Vec<bool> = t.iter().zip(&s).map(|(a, b)| !a.is_nan() && !b.is_nan()).collect();
    let centres = (0..n_centres).map(|i| i.to_string()).collect();
    Ok(Panel::new(centres, y, t, s, observed)?)
}

/// Fits a covariance structure to a row-major `n_centres x n_years` panel.
///
/// # Safety
/// `theta_hat` and `s2` must point to `n_centres * n_years` doubles, `years`
/// to `n_years` integers; `out_model` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ebmon_panel_fit(
    theta_hat: *const f64,
    s2: *const f64,
    years: *const i32,
    n_centres: usize,
    n_years: usize,
    structure: EbmonStructure,
    out_model: *mut *mut EbmonModel,
) -> EbmonStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        *slot = ptr::null_mut();
        let panel = panel_from(theta_hat, s2, years, n_centres, n_years)?;
        let model = longitudinal::fit(&panel, structure.into())?;
        *slot = Box::into_raw(Box::new(EbmonModel { model }));
        Ok(())
    })
}

/// Builds a structured model from named parameters (`tau2`, `rho`,
/// `rho_cs`, `alpha`, `beta`, `tau2_a`, `tau2_b`, `rho_ab`). `mean` may be
/// NULL for random coefficients. `time_origin` defaults to the first year
/// minus one when `has_time_origin` is false.
///
/// # Safety
/// `years` (and `mean` if non-null) must point to `n_years` values; `names`
/// and `values` to `n_params` entries of NUL-terminated strings and doubles.
#[no_mangle]
pub unsafe extern "C" fn ebmon_model_from_params(
    structure: EbmonStructure,
    years: *const i32,
    n_years: usize,
    mean: *const f64,
    names: *const *const c_char,
    values: *const f64,
    n_params: usize,
    time_origin: i32,
    has_time_origin: bool,
    log_likelihood: f64,
    out_model: *mut *mut EbmonModel,
) -> EbmonStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        *slot = ptr::null_mut();
        let years = slice(years, n_years, "years")?.to_vec();
        let mean = if mean.is_null() { None } else { Some(slice(mean, n_years, "mean")?.to_vec()) };
        let names = slice(names, n_params, "names")?;
        let values = slice(values, n_params, "values")?;
        let mut params = BTreeMap::new();
        for (k, &name) in names.iter().enumerate() {
            params.insert(string(name, "parameter name")?, values[k]);
        }
        let model = LongitudinalModel::from_params(
            structure.into(),
            years,
            mean,
            params,
            has_time_origin.then_some(time_origin),
            log_likelihood,
        )?;
        *slot = Box::into_raw(Box::new(EbmonModel { model }));
        Ok(())
    })
}

/// Log-likelihood, both AIC conventions and the parameter count. Any output
/// may be NULL.
///
/// # Safety
/// `model` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ebmon_model_fit_stats(
    model: *const EbmonModel,
    log_likelihood: *mut f64,
    aic: *mut f64,
    aic_textbook: *mut f64,
    n_params: *mut usize,
) -> EbmonStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let s = longitudinal::model_fit_stats(&m.model);
        if let Some(v) = log_likelihood.as_mut() {
            *v = s.log_likelihood;
        }
        if let Some(v) = aic.as_mut() {
            *v = s.aic;
        }
        if let Some(v) = aic_textbook.as_mut() {
            *v = s.aic_textbook;
        }
        if let Some(v) = n_params.as_mut() {
            *v = s.n_params;
        }
        Ok(())
    })
}

/// Mean (`n_years`) and row-major covariance (`n_years^2`) of the true
/// effects. Either output may be NULL.
///
/// # Safety
/// Non-null outputs must hold the documented number of doubles.
#[no_mangle]
pub unsafe extern "C" fn ebmon_model_moments(
    model: *const EbmonModel,
    n_years: usize,
    mean: *mut f64,
    cov: *mut f64,
) -> EbmonStatus {
    guard(|| {
        let m = &handle(model, "model")?.model;
        let j = m.years.len();
        if n_years != j {
            return Err(invalid(format!("model has {j} years, not {n_years}")));
        }
        if !mean.is_null() {
            slice_mut(mean, j, "mean")?.copy_from_slice(&m.mean);
        }
        if !cov.is_null() {
            let c = slice_mut(cov, j * j, "cov")?;
            for (a, row) in m.cov.iter().enumerate() {
                c[a * j..(a + 1) * j].copy_from_slice(row);
            }
        }
        Ok(())
    })
}

/// Looks up a named structure parameter.
///
/// # Safety
/// `name` must be a NUL-terminated string and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn ebmon_model_param(
    model: *const EbmonModel,
    name: *const c_char,
    value: *mut f64,
) -> EbmonStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let name = string(name, "name")?;
        let v = out(value, "value")?;
        *v = m
            .model
            .param(&name)
            .ok_or_else(|| invalid(format!("model has no parameter `{name}`")))?;
        Ok(())
    })
}

/// Next-year mean and variance under `policy` (`carry`, `trend` or
/// `manual=<v>`).
///
/// # Safety
/// `policy` must be a NUL-terminated string; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn ebmon_model_extrapolate(
    model: *const EbmonModel,
    policy: *const c_char,
    mu_next: *mut f64,
    tau2_next: *mut f64,
) -> EbmonStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let policy: ExtrapolationPolicy = string(policy, "policy")?.parse()?;
        let (mu, tau2) = (out(mu_next, "mu_next")?, out(tau2_next, "tau2_next")?);
        let ext = extrapolate(&m.model, policy)?;
        *mu = ext.mu_next();
        *tau2 = ext.tau2_next();
        Ok(())
    })
}

/// Predictive mean and variance of next year's effect for one centre whose
/// crude effects (NaN when missing) are aligned with the model's years.
///
/// # Safety
/// `theta_hat` and `s2` must point to `n_years` doubles; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn ebmon_model_predict(
    model: *const EbmonModel,
    policy: *const c_char,
    theta_hat: *const f64,
    s2: *const f64,
    n_years: usize,
    mean: *mut f64,
    variance: *mut f64,
) -> EbmonStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let policy: ExtrapolationPolicy = string(policy, "policy")?.parse()?;
        let j = m.model.years.len();
        if n_years != j {
            return Err(invalid(format!("model has {j} years, not {n_years}")));
        }
        let (t, s) = (slice(theta_hat, j, "theta_hat")?, slice(s2, j, "s2")?);
        let (mo, vo) = (out(mean, "mean")?, out(variance, "variance")?);
        let history: Vec<(i32, f64, f64)> = (0..j)
            .filter(|&k| !t[k].is_nan() && !s[k].is_nan())
            .map(|k| (m.model.years[k], t[k], s[k]))
            .collect();
        let ext = extrapolate(&m.model, policy)?;
        let p = predict_next(&ext, "centre", &history)?;
        *mo = p.mean;
        *vo = p.variance;
        Ok(())
    })
}

/// # Safety
/// `model` must be a handle from this library (or NULL) and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn ebmon_model_free(model: *mut EbmonModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
