use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{build_structured_t, LongitudinalModel, Panel, Structure};
use crate::error::{Error, Result};
use crate::linalg;
use crate::ranking::{self, RankabilityReport, RankingRow};
use crate::univariate::PosteriorSummary;

/// How the mean is carried to the next year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtrapolationPolicy {
    Manual(f64),
    CarryLast,
    LinearTrend,
}

impl FromStr for ExtrapolationPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "carry" | "carry_last" => Ok(ExtrapolationPolicy::CarryLast),
            "trend" | "linear_trend" => Ok(ExtrapolationPolicy::LinearTrend),
            "manual" => Err(Error::invalid("manual extrapolation needs a value: manual=<v>")),
            _ => match s.strip_prefix("manual=") {
                Some(v) => v
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(ExtrapolationPolicy::Manual)
                    .ok_or_else(|| Error::invalid(format!("bad manual extrapolation value `{v}`"))),
                None => Err(Error::invalid(format!(
                    "unknown extrapolation policy `{s}` (expected manual=<v>, carry or trend)"
                ))),
            },
        }
    }
}

impl fmt::Display for ExtrapolationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtrapolationPolicy::Manual(v) => write!(f, "manual={v}"),
            ExtrapolationPolicy::CarryLast => f.write_str("carry"),
            ExtrapolationPolicy::LinearTrend => f.write_str("trend"),
        }
    }
}

/// Model mean and covariance extended by the year after the last fitted one.
#[derive(Debug, Clone, PartialEq)]
pub struct Extrapolation {
    pub structure: Structure,
    /// Fitted years followed by the extrapolated year.
    pub years: Vec<i32>,
    pub mean: Vec<f64>,
    pub cov: DMatrix<f64>,
    pub policy: ExtrapolationPolicy,
}

impl Extrapolation {
    pub fn next_year(&self) -> i32 {
        *self.years.last().expect("non-empty")
    }

    pub fn mu_next(&self) -> f64 {
        *self.mean.last().expect("non-empty")
    }

    pub fn tau2_next(&self) -> f64 {
        let n = self.cov.nrows();
        self.cov[(n - 1, n - 1)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDistribution {
    pub centre_id: String,
    pub mean: f64,
    pub variance: f64,
    pub years_used: Vec<i32>,
}

fn linear_trend(years: &[i32], mean: &[f64], at: i32) -> f64 {
    let n = years.len() as f64;
    if years.len() < 2 {
        return mean[0];
    }
    let xbar = years.iter().map(|&y| f64::from(y)).sum::<f64>() / n;
    let ybar = mean.iter().sum::<f64>() / n;
    let sxy: f64 = years.iter().zip(mean).map(|(&x, y)| (f64::from(x) - xbar) * (y - ybar)).sum();
    let sxx: f64 = years.iter().map(|&x| (f64::from(x) - xbar).powi(2)).sum();
    ybar + sxy / sxx * (f64::from(at) - xbar)
}

/// Extends mean and covariance to the next year.
///
/// Unstructured covariances cannot be extrapolated. Random coefficients
/// always use their own linear mean; `policy` applies to the other two.
pub fn extrapolate(model: &LongitudinalModel, policy: ExtrapolationPolicy) -> Result<Extrapolation> {
    if model.structure == Structure::Unstructured {
        return Err(Error::invalid(
            "an unstructured covariance cannot be extrapolated; fit ar1, cs or rc instead",
        ));
    }
    let next = model.years.last().copied().ok_or_else(|| Error::invalid("model has no years"))? + 1;
    let mut years = model.years.clone();
    years.push(next);
    let cov = build_structured_t(model.structure, &model.structure_params, &years, model.time_origin)?;
    let (mu_next, policy) = match model.structure {
        Structure::RandomCoefficients => {
            let a = model.param("alpha").unwrap_or(model.mean[0]);
            let b = model.param("beta").unwrap_or(0.0);
            if policy != ExtrapolationPolicy::LinearTrend {
                log::info!("random coefficients: mean extrapolated from its own linear trend");
            }
            (a + b * f64::from(next - model.time_origin), ExtrapolationPolicy::LinearTrend)
        }
        _ => {
            let m = match policy {
                ExtrapolationPolicy::Manual(v) => v,
                ExtrapolationPolicy::CarryLast => *model.mean.last().expect("non-empty"),
                ExtrapolationPolicy::LinearTrend => linear_trend(&model.years, &model.mean, next),
            };
            (m, policy)
        }
    };
    let mut mean = model.mean.clone();
    mean.push(mu_next);
    Ok(Extrapolation {
        structure: model.structure,
        years,
        mean,
        cov,
        policy,
    })
}

/// Conditional law of next year's true effect given one centre's observed
/// `(year, theta_hat, s2)` history.
pub fn predict_next(
    ext: &Extrapolation,
    centre_id: &str,
    history: &[(i32, f64, f64)],
) -> Result<PredictiveDistribution> {
    let j = ext.years.len() - 1;
    let mut idx = Vec::with_capacity(history.len());
    for &(year, theta, s2) in history {
        let k = ext.years[..j]
            .iter()
            .position(|&y| y == year)
            .ok_or_else(|| Error::invalid(format!("centre {centre_id}: year {year} not in the model")))?;
        if idx.contains(&k) {
            return Err(Error::Duplicate { centre: centre_id.to_string(), year });
        }
        if !theta.is_finite() || !(s2 >= 0.0) {
            return Err(Error::invalid(format!("centre {centre_id}: invalid history in year {year}")));
        }
        idx.push(k);
    }
    let mu_next = ext.mu_next();
    let tau2_next = ext.tau2_next();
    if idx.is_empty() {
        return Ok(PredictiveDistribution {
            centre_id: centre_id.to_string(),
            mean: mu_next,
            variance: tau2_next,
            years_used: Vec::new(),
        });
    }
    let mut v = linalg::select(&ext.cov, &idx, &idx);
    for (a, h) in history.iter().enumerate() {
        v[(a, a)] += h.2;
    }
    let k = DVector::from_iterator(idx.len(), idx.iter().map(|&i| ext.cov[(i, j)]));
    let resid = DVector::from_iterator(
        idx.len(),
        history.iter().zip(&idx).map(|(h, &i)| h.1 - ext.mean[i]),
    );
    let chol = linalg::cholesky(&v, &format!("conditioning matrix of centre {centre_id}"))?;
    let w = chol.solve(&k);
    let mean = mu_next + w.dot(&resid);
    let variance = (tau2_next - w.dot(&k)).max(0.0);
    let mut years_used: Vec<i32> = history.iter().map(|h| h.0).collect();
    years_used.sort_unstable();
    Ok(PredictiveDistribution {
        centre_id: centre_id.to_string(),
        mean,
        variance,
        years_used,
    })
}

/// Predictions for every centre of a panel (same years as the model).
pub fn predict_panel(ext: &Extrapolation, panel: &Panel) -> Result<Vec<PredictiveDistribution>> {
    if panel.years[..] != ext.years[..ext.years.len() - 1] {
        return Err(Error::invalid("panel years differ from the model's years"));
    }
    (0..panel.n_centres())
        .map(|i| {
            let hist: Vec<(i32, f64, f64)> = panel
                .history(i)
                .into_iter()
                .map(|(j, t, s)| (panel.years[j], t, s))
                .collect();
            predict_next(ext, &panel.centres[i], &hist)
        })
        .collect()
}

/// Ranking of predicted next-year effects, treating each predictive law as a
/// posterior under the prior `N(mu_next, tau2_next)`.
///
/// `crude_pct` in the returned rows is the percentile of the predicted mean.
pub fn predictive_ranking(
    predictions: &[PredictiveDistribution],
    mu_next: f64,
    tau2_next: f64,
) -> (Vec<RankingRow>, RankabilityReport) {
    let posts: Vec<PosteriorSummary> = predictions
        .iter()
        .map(|p| PosteriorSummary {
            centre_id: p.centre_id.clone(),
            ebe: p.mean,
            pv: p.variance,
            shrinkage: if tau2_next > 0.0 { (1.0 - p.variance / tau2_next).clamp(0.0, 1.0) } else { 0.0 },
        })
        .collect();
    let means: Vec<f64> = predictions.iter().map(|p| p.mean).collect();
    ranking::rank_table(&means, &posts, mu_next, tau2_next)
}
