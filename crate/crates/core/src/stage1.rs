//! First stage: patient-mix logistic regression without centre terms, and
//! reduction of patient records to per centre-year observed/expected counts
//! and crude score-statistic effects.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::stats::{expit, log1pexp, two_sided_z};

pub const DEFAULT_MIN_INFORMATION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub centre_id: String,
    pub year: i32,
    pub outcome: u8,
    /// Covariate vector; the first entry is the constant 1.
    pub covariates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaModel {
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
}

impl BetaModel {
    pub fn linear_predictor(&self, covariates: &[f64]) -> f64 {
        self.coefficients
            .iter()
            .zip(covariates)
            .map(|(b, x)| b * x)
            .sum()
    }
}

/// Observed count, expected count and Bernoulli information of one centre-year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentreYearSummary {
    pub centre_id: String,
    pub year: i32,
    pub n: usize,
    pub observed: f64,
    pub expected: f64,
    pub information: f64,
}

impl CentreYearSummary {
    /// Builds a summary from (outcome, fitted probability) pairs.
    pub fn from_probabilities(
        centre_id: impl Into<String>,
        year: i32,
        pairs: impl IntoIterator<Item = (u8, f64)>,
    ) -> Self {
        let mut s = CentreYearSummary {
            centre_id: centre_id.into(),
            year,
            n: 0,
            observed: 0.0,
            expected: 0.0,
            information: 0.0,
        };
        for (y, p) in pairs {
            s.n += 1;
            s.observed += f64::from(y);
            s.expected += p;
            s.information += p * (1.0 - p);
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n as f64;
        let ok = self.n > 0
            && (0.0..=n).contains(&self.observed)
            && (0.0..=n).contains(&self.expected)
            && self.information >= 0.0
            && self.information <= n / 4.0 + 1e-9 * n;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "inconsistent summary for centre {} year {}: n={} O={} E={} var={}",
                self.centre_id, self.year, self.n, self.observed, self.expected, self.information
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrudeEffect {
    pub centre_id: String,
    pub year: i32,
    /// Log-odds deviation (O - E) / var.
    pub theta_hat: f64,
    /// Likelihood variance 1 / var.
    pub s2: f64,
}

/// A centre-year left out of the crude-effect table.
#[derive(Debug, Clone, PartialEq)]
pub struct Exclusion {
    pub centre_id: String,
    pub year: i32,
    pub information: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Copy)]
pub struct LogisticOptions {
    pub max_iterations: usize,
    pub score_tolerance: f64,
    pub relative_loglik_tolerance: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions {
            max_iterations: 100,
            score_tolerance: 1e-8,
            relative_loglik_tolerance: 1e-10,
        }
    }
}

/// Linear predictors beyond this magnitude mean the fitted probabilities have
/// collapsed to 0 or 1.
const SEPARATION_ETA: f64 = 35.0;

fn validate_patients(patients: &[PatientRecord]) -> Result<usize> {
    let first = patients
        .first()
        .ok_or_else(|| Error::invalid("no patient records"))?;
    let p = first.covariates.len();
    if p == 0 {
        return Err(Error::invalid("covariate vector is empty"));
    }
    for (k, r) in patients.iter().enumerate() {
        if r.outcome > 1 {
            return Err(Error::invalid(format!("record {k}: outcome {} not in {{0,1}}", r.outcome)));
        }
        if r.covariates.len() != p {
            return Err(Error::invalid(format!(
                "record {k}: {} covariates, expected {p}",
                r.covariates.len()
            )));
        }
        if (r.covariates[0] - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "record {k}: first covariate must be the constant 1, got {}",
                r.covariates[0]
            )));
        }
        if r.covariates.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("record {k}: non-finite covariate")));
        }
    }
    Ok(p)
}

fn bernoulli_loglik(eta: &DVector<f64>, y: &DVector<f64>) -> f64 {
    eta.iter().zip(y.iter()).map(|(e, yi)| yi * e - log1pexp(*e)).sum()
}

/// Maximum-likelihood logistic regression by IRLS with step-halving.
pub fn fit_logistic(patients: &[PatientRecord]) -> Result<BetaModel> {
    fit_logistic_with(patients, &LogisticOptions::default())
}

pub fn fit_logistic_with(patients: &[PatientRecord], opts: &LogisticOptions) -> Result<BetaModel> {
    fit_logistic_traced(patients, opts).map(|(m, _)| m)
}

/// As [`fit_logistic_with`], also returning the log-likelihood after every
/// iteration.
pub fn fit_logistic_traced(
    patients: &[PatientRecord],
    opts: &LogisticOptions,
) -> Result<(BetaModel, Vec<f64>)> {
    let p = validate_patients(patients)?;
    let n = patients.len();
    let x = DMatrix::from_fn(n, p, |i, j| patients[i].covariates[j]);
    let y = DVector::from_iterator(n, patients.iter().map(|r| f64::from(r.outcome)));

    if let Some(col) = linalg::first_dependent_column(&x) {
        return Err(Error::RankDeficient {
            column: col,
            name: format!("x{}", col + 1),
        });
    }

    let mut beta = DVector::zeros(p);
    let events = y.sum();
    if events == 0.0 || events == n as f64 {
        return Err(Error::NonConvergence {
            iterations: 0,
            reason: "all outcomes identical: complete separation, MLE at infinity".into(),
            last: beta.iter().cloned().collect(),
        });
    }
    beta[0] = (events / (n as f64 - events)).ln();

    let mut eta = &x * &beta;
    let mut ll = bernoulli_loglik(&eta, &y);
    let mut trace = vec![ll];
    let separated = |eta: &DVector<f64>| eta.iter().any(|e| e.abs() > SEPARATION_ETA);

    for iter in 1..=opts.max_iterations {
        let prob = eta.map(expit);
        let resid = &y - &prob;
        let score = x.transpose() * &resid;
        if score.amax() < opts.score_tolerance {
            return Ok((
                BetaModel {
                    coefficients: beta.iter().cloned().collect(),
                    converged: true,
                    iterations: iter - 1,
                    log_likelihood: ll,
                },
                trace,
            ));
        }
        let w = prob.map(|q| q * (1.0 - q));
        let xw = DMatrix::from_fn(n, p, |i, j| x[(i, j)] * w[i]);
        let info = x.transpose() * xw;
        let chol = linalg::cholesky(&info, "logistic information matrix").map_err(|_| {
            Error::NonConvergence {
                iterations: iter,
                reason: "information matrix singular: quasi-separation".into(),
                last: beta.iter().cloned().collect(),
            }
        })?;
        let delta = chol.solve(&score);

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = &beta + &delta * step;
            let cand_eta = &x * &cand;
            let cand_ll = bernoulli_loglik(&cand_eta, &y);
            if cand_ll.is_finite() && cand_ll >= ll {
                accepted = Some((cand, cand_eta, cand_ll));
                break;
            }
            step *= 0.5;
        }
        let Some((new_beta, new_eta, new_ll)) = accepted else {
            // No ascent possible: already at the maximum to machine precision.
            return Ok((
                BetaModel {
                    coefficients: beta.iter().cloned().collect(),
                    converged: true,
                    iterations: iter,
                    log_likelihood: ll,
                },
                trace,
            ));
        };
        let rel = (new_ll - ll).abs() / ll.abs().max(f64::MIN_POSITIVE);
        beta = new_beta;
        eta = new_eta;
        ll = new_ll;
        trace.push(ll);

        if separated(&eta) {
            return Err(Error::NonConvergence {
                iterations: iter,
                reason: "fitted probabilities numerically 0 or 1: quasi-separation".into(),
                last: beta.iter().cloned().collect(),
            });
        }
        if rel < opts.relative_loglik_tolerance {
            return Ok((
                BetaModel {
                    coefficients: beta.iter().cloned().collect(),
                    converged: true,
                    iterations: iter,
                    log_likelihood: ll,
                },
                trace,
            ));
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iterations,
        reason: "IRLS iteration limit reached (possible quasi-separation)".into(),
        last: beta.iter().cloned().collect(),
    })
}

/// Per centre-year O, E and information under the fitted coefficients.
/// Output is ordered by (centre_id, year).
pub fn summarize(patients: &[PatientRecord], beta: &BetaModel) -> Result<Vec<CentreYearSummary>> {
    let mut groups: BTreeMap<(&str, i32), Vec<(u8, f64)>> = BTreeMap::new();
    for (k, r) in patients.iter().enumerate() {
        if r.covariates.len() != beta.coefficients.len() {
            return Err(Error::invalid(format!(
                "record {k}: {} covariates but model has {} coefficients",
                r.covariates.len(),
                beta.coefficients.len()
            )));
        }
        let prob = expit(beta.linear_predictor(&r.covariates));
        groups
            .entry((r.centre_id.as_str(), r.year))
            .or_default()
            .push((r.outcome, prob));
    }
    Ok(groups
        .into_iter()
        .map(|((c, y), pairs)| CentreYearSummary::from_probabilities(c, y, pairs))
        .collect())
}

/// Score-statistic crude effect `(O - E) / var` with variance `1 / var`.
pub fn crude_effect(
    summary: &CentreYearSummary,
    min_information: f64,
) -> std::result::Result<CrudeEffect, Exclusion> {
    if !(summary.information > min_information) {
        return Err(Exclusion {
            centre_id: summary.centre_id.clone(),
            year: summary.year,
            information: summary.information,
            reason: format!(
                "information {:.3e} not above threshold {:.3e}",
                summary.information, min_information
            ),
        });
    }
    Ok(CrudeEffect {
        centre_id: summary.centre_id.clone(),
        year: summary.year,
        theta_hat: (summary.observed - summary.expected) / summary.information,
        s2: 1.0 / summary.information,
    })
}

/// Applies [`crude_effect`] to every summary, logging each exclusion.
pub fn crude_effects(
    summaries: &[CentreYearSummary],
    min_information: f64,
) -> (Vec<CrudeEffect>, Vec<Exclusion>) {
    let mut kept = Vec::with_capacity(summaries.len());
    let mut excluded = Vec::new();
    for s in summaries {
        match crude_effect(s, min_information) {
            Ok(c) => kept.push(c),
            Err(e) => {
                log::warn!("excluding centre {} year {}: {}", e.centre_id, e.year, e.reason);
                excluded.push(e);
            }
        }
    }
    (kept, excluded)
}

/// W = (O - E) / n with standard error sqrt(var) / n.
pub fn w_statistic(summary: &CentreYearSummary) -> Result<(f64, f64)> {
    if summary.n == 0 {
        return Err(Error::invalid("w statistic needs n > 0"));
    }
    let n = summary.n as f64;
    Ok(((summary.observed - summary.expected) / n, summary.information.sqrt() / n))
}

/// Wald interval `theta_hat ± z sqrt(s2)`.
pub fn confidence_interval(crude: &CrudeEffect, level: f64) -> (f64, f64) {
    let half = two_sided_z(level) * crude.s2.sqrt();
    (crude.theta_hat - half, crude.theta_hat + half)
}

/// Exact log-likelihood of a centre effect `theta` entering as an offset on
/// top of fixed linear predictors.
pub fn offset_log_likelihood(linear_predictors: &[f64], outcomes: &[u8], theta: f64) -> f64 {
    linear_predictors
        .iter()
        .zip(outcomes)
        .map(|(eta, &y)| {
            let e = eta + theta;
            f64::from(y) * e - log1pexp(e)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::logit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn intercept_only(events: usize, n: usize) -> Vec<PatientRecord> {
        (0..n)
            .map(|k| PatientRecord {
                centre_id: "A".into(),
                year: 1995,
                outcome: u8::from(k < events),
                covariates: vec![1.0],
            })
            .collect()
    }

    #[test]
    fn intercept_only_closed_form() {
        let m = fit_logistic(&intercept_only(30, 100)).unwrap();
        assert!(m.converged);
        assert!((m.coefficients[0] - logit(0.3)).abs() < 1e-9);
        assert!((m.coefficients[0] + 0.8473).abs() < 1e-4);
    }

    #[test]
    fn all_zero_outcomes_is_separation() {
        match fit_logistic(&intercept_only(0, 50)) {
            Err(Error::NonConvergence { .. }) => {}
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn quasi_separation_in_covariate() {
        let pts: Vec<_> = (0..40)
            .map(|k| PatientRecord {
                centre_id: "A".into(),
                year: 1,
                outcome: u8::from(k >= 20),
                covariates: vec![1.0, k as f64],
            })
            .collect();
        assert!(matches!(fit_logistic(&pts), Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn collinear_column_named() {
        let pts: Vec<_> = (0..30)
            .map(|k| PatientRecord {
                centre_id: "A".into(),
                year: 1,
                outcome: u8::from(k % 3 == 0),
                covariates: vec![1.0, k as f64, 2.0 * k as f64],
            })
            .collect();
        match fit_logistic(&pts) {
            Err(Error::RankDeficient { column, name }) => {
                assert_eq!(column, 2);
                assert_eq!(name, "x3");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn loglik_non_decreasing_over_iterations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<_> = (0..500)
            .map(|_| {
                let x1: f64 = rng.random_range(-2.0..2.0);
                let x2: f64 = rng.random_range(-1.0..3.0);
                let p = expit(-1.0 + 0.8 * x1 - 0.5 * x2);
                PatientRecord {
                    centre_id: "A".into(),
                    year: 1,
                    outcome: u8::from(rng.random::<f64>() < p),
                    covariates: vec![1.0, x1, x2],
                }
            })
            .collect();
        let (m, trace) = fit_logistic_traced(&pts, &LogisticOptions::default()).unwrap();
        assert!(m.converged);
        for w in trace.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn summary_arithmetic() {
        let pairs = (0..100).map(|k| (u8::from(k < 30), 0.2));
        let s = CentreYearSummary::from_probabilities("A", 1995, pairs);
        assert_eq!(s.n, 100);
        assert_eq!(s.observed, 30.0);
        assert!((s.expected - 20.0).abs() < 1e-12);
        assert!((s.information - 16.0).abs() < 1e-12);
        let (w, se) = w_statistic(&s).unwrap();
        assert!((w - 0.1).abs() < 1e-12);
        assert!((se - 0.04).abs() < 1e-12);
    }

    #[test]
    fn empty_groups_not_emitted() {
        let beta = BetaModel { coefficients: vec![0.0], converged: true, iterations: 0, log_likelihood: 0.0 };
        let mut pts = intercept_only(3, 10);
        pts.iter_mut().skip(5).for_each(|r| r.year = 1996);
        let s = summarize(&pts, &beta).unwrap();
        assert_eq!(s.len(), 2);
        assert!(summarize(&[], &beta).unwrap().is_empty());
    }

    #[test]
    fn summarize_rejects_dimension_mismatch() {
        let beta = BetaModel { coefficients: vec![0.0, 1.0], converged: true, iterations: 0, log_likelihood: 0.0 };
        assert!(summarize(&intercept_only(3, 10), &beta).is_err());
    }

    #[test]
    fn crude_effect_arithmetic() {
        let s = CentreYearSummary {
            centre_id: "A".into(),
            year: 1995,
            n: 100,
            observed: 30.0,
            expected: 20.0,
            information: 16.0,
        };
        let c = crude_effect(&s, DEFAULT_MIN_INFORMATION).unwrap();
        assert_eq!(c.theta_hat, 0.625);
        assert_eq!(c.s2, 0.0625);
        let (lo, hi) = confidence_interval(&c, 0.95);
        assert!((lo - 0.135).abs() < 1e-3 && (hi - 1.115).abs() < 1e-3);
        assert_eq!(confidence_interval(&c, 0.0), (0.625, 0.625));

        let zero = CentreYearSummary { observed: 20.0, ..s.clone() };
        assert_eq!(crude_effect(&zero, DEFAULT_MIN_INFORMATION).unwrap().theta_hat, 0.0);
    }

    #[test]
    fn uninformative_centre_excluded() {
        let s = CentreYearSummary {
            centre_id: "Z".into(),
            year: 1,
            n: 5,
            observed: 0.0,
            expected: 0.0,
            information: 0.0,
        };
        let (kept, excl) = crude_effects(&[s], DEFAULT_MIN_INFORMATION);
        assert!(kept.is_empty());
        assert_eq!(excl.len(), 1);
        assert_eq!(excl[0].centre_id, "Z");
    }
}
