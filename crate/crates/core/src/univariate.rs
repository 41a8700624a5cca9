//! Normal mixing distribution for one year's crude effects.
//!
//! The crude effects are modelled as `theta_hat_i ~ N(theta_i, s_i^2)` with
//! `theta_i ~ N(mu, tau^2)`, or `N(v_i' gamma, tau^2)` when centre-level
//! covariates are supplied. Fitting alternates an exact generalised
//! least-squares update of the mean parameters with an EM update of `tau^2`;
//! both steps are conditional maximisations of the marginal likelihood, so
//! the likelihood never decreases.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::ranking;
use crate::stage1::CrudeEffect;
use crate::stats::{chi2_quantile, median, norm_logpdf, two_sided_z};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorMethod {
    MleEm,
    Moment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorEstimate {
    pub mu: f64,
    pub tau2: f64,
    pub method: PriorMethod,
    /// Marginal log-likelihood `sum log N(theta_hat_i; mu, s_i^2 + tau^2)`.
    pub log_likelihood: f64,
    pub iterations: usize,
    /// `tau2` sits on the zero boundary.
    pub at_boundary: bool,
    pub converged: bool,
    /// Marginal log-likelihood after every iteration (EM fits only).
    #[serde(skip)]
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub centre_id: String,
    /// Posterior mean (the empirical Bayes estimate).
    pub ebe: f64,
    /// Posterior variance.
    pub pv: f64,
    /// Weight `tau^2 / (tau^2 + s^2)` given to the crude estimate.
    pub shrinkage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariatePrior {
    /// Intercept followed by one coefficient per covariate.
    pub gamma: Vec<f64>,
    pub tau2: f64,
    pub covariate_names: Vec<String>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub at_boundary: bool,
    pub converged: bool,
    /// `gamma_0 + sum_l v_il gamma_l` per centre, in input order.
    pub fitted_means: Vec<f64>,
    #[serde(skip)]
    pub trace: Vec<f64>,
}

impl CovariatePrior {
    /// Posterior of each centre under its own covariate-predicted prior mean.
    pub fn posteriors(&self, crudes: &[CrudeEffect]) -> Vec<PosteriorSummary> {
        crudes
            .iter()
            .zip(&self.fitted_means)
            .map(|(c, &m)| posterior_with_mean(c, m, self.tau2))
            .collect()
    }

    /// Intervals for every centre effect given the covariate model and data.
    pub fn tolerance_intervals(&self, crudes: &[CrudeEffect], level: f64) -> Vec<(f64, f64)> {
        self.posteriors(crudes)
            .iter()
            .map(|p| posterior_interval(p, level))
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EmOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            tolerance: 1e-10,
            max_iterations: 10_000,
        }
    }
}

fn validate(crudes: &[CrudeEffect]) -> Result<()> {
    if crudes.len() < 2 {
        return Err(Error::invalid(format!(
            "at least 2 centres are needed to fit a prior, got {}",
            crudes.len()
        )));
    }
    for c in crudes {
        if !c.theta_hat.is_finite() || !c.s2.is_finite() || c.s2 <= 0.0 {
            return Err(Error::invalid(format!(
                "centre {}: non-finite estimate or non-positive variance (theta_hat={}, s2={})",
                c.centre_id, c.theta_hat, c.s2
            )));
        }
    }
    Ok(())
}

/// Gaussian random-intercept regression of crude effects on a design matrix.
struct NormalRegression<'a> {
    theta: Vec<f64>,
    s2: Vec<f64>,
    design: &'a DMatrix<f64>,
}

struct RegressionFit {
    gamma: DVector<f64>,
    tau2: f64,
    log_likelihood: f64,
    iterations: usize,
    at_boundary: bool,
    converged: bool,
    trace: Vec<f64>,
}

impl NormalRegression<'_> {
    fn n(&self) -> usize {
        self.theta.len()
    }

    /// Weighted least squares with weights `1 / (s_i^2 + tau2)`.
    fn gls(&self, tau2: f64) -> DVector<f64> {
        let q = self.design.ncols();
        let mut xtwx = DMatrix::zeros(q, q);
        let mut xtwy = DVector::zeros(q);
        for i in 0..self.n() {
            let w = 1.0 / (self.s2[i] + tau2);
            let row = self.design.row(i).transpose();
            xtwx += &row * row.transpose() * w;
            xtwy += &row * (w * self.theta[i]);
        }
        // Full column rank was checked on construction.
        xtwx.cholesky()
            .expect("design has full column rank")
            .solve(&xtwy)
    }

    fn means(&self, gamma: &DVector<f64>) -> DVector<f64> {
        self.design * gamma
    }

    fn log_likelihood(&self, gamma: &DVector<f64>, tau2: f64) -> f64 {
        let m = self.means(gamma);
        (0..self.n())
            .map(|i| norm_logpdf(self.theta[i], m[i], self.s2[i] + tau2))
            .sum()
    }

    fn profile_log_likelihood(&self, tau2: f64) -> f64 {
        self.log_likelihood(&self.gls(tau2), tau2)
    }

    /// Generalised DerSimonian-Laird moment estimate of tau2, truncated at 0.
    fn moment_tau2(&self) -> f64 {
        let n = self.n();
        let q = self.design.ncols();
        let gamma = self.gls(0.0);
        let m = self.means(&gamma);
        let w: Vec<f64> = self.s2.iter().map(|s| 1.0 / s).collect();
        let qstat: f64 = (0..n).map(|i| w[i] * (self.theta[i] - m[i]).powi(2)).sum();
        let mut xtwx = DMatrix::zeros(q, q);
        let mut xtw2x = DMatrix::zeros(q, q);
        for i in 0..n {
            let row = self.design.row(i).transpose();
            let outer = &row * row.transpose();
            xtwx += &outer * w[i];
            xtw2x += &outer * (w[i] * w[i]);
        }
        let inv = xtwx.try_inverse().expect("design has full column rank");
        let denom = w.iter().sum::<f64>() - (inv * xtw2x).trace();
        if denom <= 0.0 {
            return 0.0;
        }
        ((qstat - (n - q) as f64) / denom).max(0.0)
    }

    /// Newton steps on the profile likelihood of tau2, each accepted only if
    /// it increases the likelihood. EM slows down near the optimum and stops
    /// on its likelihood tolerance while tau2 can still be visibly off.
    fn newton_polish(&self, mut tau2: f64, mut ll: f64, trace: &mut Vec<f64>) -> (f64, f64) {
        for _ in 0..100 {
            if tau2 <= 0.0 {
                break;
            }
            let m = self.means(&self.gls(tau2));
            let (mut g, mut h) = (0.0, 0.0);
            for i in 0..self.n() {
                let v = self.s2[i] + tau2;
                let r2 = (self.theta[i] - m[i]).powi(2);
                g += 0.5 * (r2 / (v * v) - 1.0 / v);
                h += 0.5 / (v * v) - r2 / (v * v * v);
            }
            let mut step = if h < 0.0 { -g / h } else { g * tau2 * tau2 };
            let mut accepted = false;
            for _ in 0..40 {
                let cand = (tau2 + step).max(0.0);
                let cand_ll = self.profile_log_likelihood(cand);
                if cand_ll > ll {
                    tau2 = cand;
                    ll = cand_ll;
                    trace.push(ll);
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted || step.abs() <= 1e-14 * (1.0 + tau2) {
                break;
            }
        }
        (tau2, ll)
    }

    fn fit_em(&self, opts: &EmOptions) -> RegressionFit {
        let median_s2 = median(&self.s2).unwrap_or(1.0);
        let mut tau2 = self.moment_tau2().max(1e-3 * median_s2);
        let mut gamma = self.gls(tau2);
        let mut ll = self.log_likelihood(&gamma, tau2);
        let mut trace = vec![ll];
        let mut converged = false;
        let mut iterations = 0;

        while iterations < opts.max_iterations {
            iterations += 1;
            gamma = self.gls(tau2);
            let m = self.means(&gamma);
            // E-step moments of theta_i - m_i, then M-step for tau2.
            let mut acc = 0.0;
            for i in 0..self.n() {
                let b = tau2 / (tau2 + self.s2[i]);
                let r = b * (self.theta[i] - m[i]);
                acc += r * r + b * self.s2[i];
            }
            tau2 = acc / self.n() as f64;
            let new_ll = self.log_likelihood(&gamma, tau2);
            trace.push(new_ll);
            let change = (new_ll - ll).abs();
            ll = new_ll;
            if change < opts.tolerance {
                converged = true;
                break;
            }
        }

        // Profile the mean parameters at the final variance.
        gamma = self.gls(tau2);
        ll = self.log_likelihood(&gamma, tau2);
        trace.push(ll);
        (tau2, ll) = self.newton_polish(tau2, ll, &mut trace);
        gamma = self.gls(tau2);

        let mut at_boundary = false;
        let gamma0 = self.gls(0.0);
        let ll0 = self.log_likelihood(&gamma0, 0.0);
        if ll0 >= ll {
            gamma = gamma0;
            tau2 = 0.0;
            ll = ll0;
            at_boundary = true;
            converged = true;
            trace.push(ll);
        }

        RegressionFit {
            gamma,
            tau2,
            log_likelihood: ll,
            iterations,
            at_boundary,
            converged,
            trace,
        }
    }
}

fn intercept_design(n: usize) -> DMatrix<f64> {
    DMatrix::from_element(n, 1, 1.0)
}

fn regression<'a>(crudes: &[CrudeEffect], design: &'a DMatrix<f64>) -> NormalRegression<'a> {
    NormalRegression {
        theta: crudes.iter().map(|c| c.theta_hat).collect(),
        s2: crudes.iter().map(|c| c.s2).collect(),
        design,
    }
}

/// Maximum-likelihood `(mu, tau^2)` of the marginal `N(mu, s_i^2 + tau^2)` model.
pub fn fit_prior_mle(crudes: &[CrudeEffect]) -> Result<PriorEstimate> {
    fit_prior_mle_with(crudes, &EmOptions::default())
}

pub fn fit_prior_mle_with(crudes: &[CrudeEffect], opts: &EmOptions) -> Result<PriorEstimate> {
    validate(crudes)?;
    let design = intercept_design(crudes.len());
    let fit = regression(crudes, &design).fit_em(opts);
    if !fit.converged {
        log::warn!(
            "prior EM stopped after {} iterations without meeting tolerance {:e}",
            fit.iterations,
            opts.tolerance
        );
    }
    Ok(PriorEstimate {
        mu: fit.gamma[0],
        tau2: fit.tau2,
        method: PriorMethod::MleEm,
        log_likelihood: fit.log_likelihood,
        iterations: fit.iterations,
        at_boundary: fit.at_boundary,
        converged: fit.converged,
        trace: fit.trace,
    })
}

/// DerSimonian-Laird moment estimate.
pub fn fit_prior_moment(crudes: &[CrudeEffect]) -> Result<PriorEstimate> {
    validate(crudes)?;
    let design = intercept_design(crudes.len());
    let reg = regression(crudes, &design);
    let tau2 = reg.moment_tau2();
    let gamma = reg.gls(tau2);
    Ok(PriorEstimate {
        mu: gamma[0],
        tau2,
        method: PriorMethod::Moment,
        log_likelihood: reg.log_likelihood(&gamma, tau2),
        iterations: 0,
        at_boundary: tau2 == 0.0,
        converged: true,
        trace: Vec::new(),
    })
}

pub fn fit_prior(crudes: &[CrudeEffect], method: PriorMethod) -> Result<PriorEstimate> {
    match method {
        PriorMethod::MleEm => fit_prior_mle(crudes),
        PriorMethod::Moment => fit_prior_moment(crudes),
    }
}

fn posterior_with_mean(crude: &CrudeEffect, mu: f64, tau2: f64) -> PosteriorSummary {
    let (shrinkage, pv) = if tau2 <= 0.0 {
        (0.0, 0.0)
    } else {
        let w = tau2 / (tau2 + crude.s2);
        (w, tau2 * crude.s2 / (tau2 + crude.s2))
    };
    PosteriorSummary {
        centre_id: crude.centre_id.clone(),
        ebe: mu + shrinkage * (crude.theta_hat - mu),
        pv,
        shrinkage,
    }
}

pub fn posterior(crude: &CrudeEffect, prior: &PriorEstimate) -> PosteriorSummary {
    posterior_with_mean(crude, prior.mu, prior.tau2)
}

pub fn posteriors(crudes: &[CrudeEffect], prior: &PriorEstimate) -> Vec<PosteriorSummary> {
    crudes.iter().map(|c| posterior(c, prior)).collect()
}

/// `ebe ± z sqrt(pv)`.
pub fn posterior_interval(post: &PosteriorSummary, level: f64) -> (f64, f64) {
    let half = two_sided_z(level) * post.pv.sqrt();
    (post.ebe - half, post.ebe + half)
}

/// `tau^2 / (tau^2 + median s^2)`.
pub fn proportion_true_variation(prior: &PriorEstimate, crudes: &[CrudeEffect]) -> f64 {
    let s2: Vec<f64> = crudes.iter().map(|c| c.s2).collect();
    rho_from(prior.tau2, &s2)
}

pub(crate) fn rho_from(tau2: f64, s2: &[f64]) -> f64 {
    if tau2 <= 0.0 {
        return 0.0;
    }
    let med = median(s2).unwrap_or(0.0);
    tau2 / (tau2 + med)
}

/// Prior mean `gamma_0 + sum_l v_il gamma_l` fitted jointly with `tau^2`.
///
/// `covariates` has one row per crude effect (same order) and one column per
/// centre-level variable, without the intercept.
pub fn fit_prior_with_covariates(
    crudes: &[CrudeEffect],
    covariates: &[Vec<f64>],
    names: &[String],
) -> Result<CovariatePrior> {
    validate(crudes)?;
    if covariates.len() != crudes.len() {
        return Err(Error::invalid(format!(
            "{} covariate rows for {} centres",
            covariates.len(),
            crudes.len()
        )));
    }
    let m = names.len();
    if let Some((i, _)) = covariates.iter().enumerate().find(|(_, r)| r.len() != m) {
        return Err(Error::invalid(format!(
            "covariate row {i} has {} entries, expected {m}",
            covariates[i].len()
        )));
    }
    if covariates.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite centre-level covariate"));
    }
    let n = crudes.len();
    if n <= m + 1 {
        return Err(Error::invalid(format!(
            "{n} centres cannot identify {} mean parameters plus a variance",
            m + 1
        )));
    }
    let design = DMatrix::from_fn(n, m + 1, |i, j| if j == 0 { 1.0 } else { covariates[i][j - 1] });
    if let Some(col) = linalg::first_dependent_column(&design) {
        let name = if col == 0 {
            "intercept".to_string()
        } else {
            names[col - 1].clone()
        };
        return Err(Error::RankDeficient { column: col, name });
    }
    let reg = regression(crudes, &design);
    let fit = reg.fit_em(&EmOptions::default());
    let fitted = reg.means(&fit.gamma);
    Ok(CovariatePrior {
        gamma: fit.gamma.iter().cloned().collect(),
        tau2: fit.tau2,
        covariate_names: names.to_vec(),
        log_likelihood: fit.log_likelihood,
        iterations: fit.iterations,
        at_boundary: fit.at_boundary,
        converged: fit.converged,
        fitted_means: fitted.iter().cloned().collect(),
        trace: fit.trace,
    })
}

/// Profile log-likelihood of `tau^2` with `mu` maximised out.
pub fn profile_log_likelihood(crudes: &[CrudeEffect], tau2: f64) -> f64 {
    let design = intercept_design(crudes.len());
    regression(crudes, &design).profile_log_likelihood(tau2)
}

/// Profile-likelihood mean `mu_hat(tau^2)`.
pub fn profiled_mu(crudes: &[CrudeEffect], tau2: f64) -> f64 {
    let design = intercept_design(crudes.len());
    regression(crudes, &design).gls(tau2)[0]
}

/// Profile-likelihood interval `{tau^2 : 2 (l_max - l_p(tau^2)) <= chi2_1(level)}`.
pub fn tau2_profile_ci(crudes: &[CrudeEffect], level: f64) -> Result<(f64, f64)> {
    if !(0.0 < level && level < 1.0) {
        return Err(Error::invalid(format!("level {level} outside (0, 1)")));
    }
    let fit = fit_prior_mle(crudes)?;
    let design = intercept_design(crudes.len());
    let reg = regression(crudes, &design);
    let lmax = fit.log_likelihood.max(reg.profile_log_likelihood(fit.tau2));
    let target = lmax - 0.5 * chi2_quantile(level, 1.0);
    let f = |t: f64| reg.profile_log_likelihood(t) - target;

    let bisect = |mut inside: f64, mut outside: f64| {
        for _ in 0..200 {
            let mid = 0.5 * (inside + outside);
            if f(mid) >= 0.0 {
                inside = mid;
            } else {
                outside = mid;
            }
            if (outside - inside).abs() <= 1e-12 * (1.0 + inside.abs()) {
                break;
            }
        }
        0.5 * (inside + outside)
    };

    let lo = if f(0.0) >= 0.0 { 0.0 } else { bisect(fit.tau2, 0.0) };

    let scale = fit.tau2.max(median(&reg.s2).unwrap_or(1.0)).max(1e-12);
    let mut outside = fit.tau2 + scale;
    let mut expansions = 0;
    while f(outside) >= 0.0 {
        outside = fit.tau2 + (outside - fit.tau2) * 2.0;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::NonConvergence {
                iterations: expansions,
                reason: "profile likelihood does not fall below the cut-off".into(),
                last: vec![outside],
            });
        }
    }
    let hi = bisect(fit.tau2, outside);
    Ok((lo, hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub tau2: f64,
    pub mu: f64,
    pub ra: f64,
    pub epc: Vec<f64>,
}

/// Posteriors, expected percentiles and rankability recomputed at fixed
/// values of `tau^2`, with `mu` re-profiled at each.
pub fn sensitivity_sweep(crudes: &[CrudeEffect], tau2_grid: &[f64]) -> Result<Vec<SensitivityRow>> {
    validate(crudes)?;
    if tau2_grid.is_empty() {
        return Err(Error::invalid("empty tau2 grid"));
    }
    if let Some(bad) = tau2_grid.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
        return Err(Error::invalid(format!("tau2 grid value {bad} must be finite and >= 0")));
    }
    let design = intercept_design(crudes.len());
    let reg = regression(crudes, &design);
    Ok(tau2_grid
        .iter()
        .map(|&tau2| {
            let mu = reg.gls(tau2)[0];
            let prior = PriorEstimate {
                mu,
                tau2,
                method: PriorMethod::MleEm,
                log_likelihood: reg.log_likelihood(&DVector::from_element(1, mu), tau2),
                iterations: 0,
                at_boundary: tau2 == 0.0,
                converged: true,
                trace: Vec::new(),
            };
            let epc: Vec<f64> = posteriors(crudes, &prior)
                .iter()
                .map(|p| ranking::epc(p, prior.mu, prior.tau2))
                .collect();
            SensitivityRow {
                tau2,
                mu,
                ra: ranking::rankability(&epc).ra,
                epc,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn crude(id: &str, theta: f64, s2: f64) -> CrudeEffect {
        CrudeEffect {
            centre_id: id.into(),
            year: 1995,
            theta_hat: theta,
            s2,
        }
    }

    #[test]
    fn all_equal_estimates_hit_boundary() {
        let c: Vec<_> = (0..10).map(|i| crude(&i.to_string(), 0.7, 0.1 + 0.05 * i as f64)).collect();
        let p = fit_prior_mle(&c).unwrap();
        assert!((p.mu - 0.7).abs() < 1e-12);
        assert_eq!(p.tau2, 0.0);
        assert!(p.at_boundary);
    }

    #[test]
    fn equal_variances_closed_form() {
        let c = vec![crude("a", -1.0, 0.5), crude("b", 1.0, 0.5)];
        let p = fit_prior_mle(&c).unwrap();
        assert!(p.mu.abs() < 1e-12);
        assert!((p.tau2 - 0.5).abs() < 1e-6, "tau2 = {}", p.tau2);
        let m = fit_prior_moment(&c).unwrap();
        assert_eq!(m.mu, p.mu);
    }

    #[test]
    fn too_few_centres_or_bad_values_rejected() {
        assert!(fit_prior_mle(&[crude("a", 0.0, 1.0)]).is_err());
        assert!(fit_prior_mle(&[crude("a", f64::NAN, 1.0), crude("b", 0.0, 1.0)]).is_err());
        assert!(fit_prior_moment(&[crude("a", 0.0, 0.0), crude("b", 0.0, 1.0)]).is_err());
    }

    #[test]
    fn posterior_arithmetic() {
        let prior = PriorEstimate {
            mu: 0.038,
            tau2: 0.124,
            method: PriorMethod::MleEm,
            log_likelihood: 0.0,
            iterations: 0,
            at_boundary: false,
            converged: true,
            trace: vec![],
        };
        let p = posterior(&crude("a", 0.5, 0.05), &prior);
        assert!((p.ebe - 0.367_241_379_310_344_8).abs() < 1e-12);
        assert!((p.ebe - 0.3673).abs() < 1e-4);
        assert!((p.pv - 0.035632).abs() < 5e-7);
        assert!((p.shrinkage - 0.71264).abs() < 5e-6);
        let (lo, hi) = posterior_interval(&p, 0.95);
        assert!((lo + 0.0027).abs() < 1e-4 && (hi - 0.7373).abs() < 1e-4);

        let flat = PriorEstimate { tau2: 0.0, ..prior.clone() };
        let q = posterior(&crude("a", 0.5, 0.05), &flat);
        assert_eq!(q.ebe, 0.038);
        assert_eq!(q.pv, 0.0);
        assert_eq!(posterior_interval(&q, 0.95), (0.038, 0.038));

        let sharp = posterior(&crude("a", 0.5, 1e-12), &prior);
        assert!((sharp.ebe - 0.5).abs() < 1e-9 && sharp.pv < 1e-11);
    }

    #[test]
    fn rho_examples() {
        let prior = |tau2| PriorEstimate {
            mu: 0.0,
            tau2,
            method: PriorMethod::MleEm,
            log_likelihood: 0.0,
            iterations: 0,
            at_boundary: false,
            converged: true,
            trace: vec![],
        };
        let c = vec![crude("a", 0.0, 0.01226)];
        assert_eq!(proportion_true_variation(&prior(0.0), &c), 0.0);
        assert!((proportion_true_variation(&prior(0.124), &c) - 0.91).abs() < 0.005);
        let c2 = vec![crude("a", 0.0, 1.0), crude("b", 0.0, 1.86)];
        assert!((proportion_true_variation(&prior(0.336), &c2) - 0.19).abs() < 0.005);
    }

    #[test]
    fn covariate_fit_rejects_rank_deficiency() {
        let c: Vec<_> = (0..6).map(|i| crude(&i.to_string(), i as f64 * 0.1, 0.2)).collect();
        let v: Vec<_> = (0..6).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let names = vec!["size".to_string(), "size2".to_string()];
        match fit_prior_with_covariates(&c, &v, &names) {
            Err(Error::RankDeficient { name, .. }) => assert_eq!(name, "size2"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sweep_validation() {
        let c = vec![crude("a", -1.0, 0.5), crude("b", 1.0, 0.5)];
        assert!(sensitivity_sweep(&c, &[]).is_err());
        assert!(sensitivity_sweep(&c, &[-0.1]).is_err());
        let rows = sensitivity_sweep(&c, &[0.0]).unwrap();
        assert_eq!(rows[0].ra, 0.0);
        assert!(rows[0].epc.iter().all(|&e| e == 50.0));
    }
}
