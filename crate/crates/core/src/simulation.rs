//! Synthetic data from known parameters, and the independent oracles the
//! test suites check the closed forms against.
//!
//! Every random draw comes from a ChaCha8 stream selected by a stable text
//! label (`"effects/<centre>"`, `"patients/<centre>/<year>"`, ...), so results
//! do not depend on thread scheduling and adding a centre leaves the draws
//! of the existing centres untouched.
//!
//! Scenario files are TOML:
//!
//! ```toml
//! seed = 20240101
//! n_centres = 112
//! years = [1996]
//! mode = "patient"          # or "crude"
//! baseline_rate = 0.16      # marginal event rate at theta = 0
//! beta = [0.8, -0.4]        # optional effects of standard normal covariates
//! information_scale = 1.0   # crude mode: multiplier on the Bernoulli information
//!
//! [patients]
//! distribution = "poisson"  # fixed (n), poisson (mean), gamma_poisson (mean, shape)
//! mean = 695
//!
//! [prior]
//! kind = "univariate"       # mu, tau2; or "longitudinal" with mean and cov
//! mu = 0.038
//! tau2 = 0.124
//! ```

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::longitudinal::{assemble_panel, Panel};
use crate::ranking::midranks;
use crate::stage1::{self, CentreYearSummary, CrudeEffect, PatientRecord, DEFAULT_MIN_INFORMATION};
use crate::stats::{expit, logit, norm_quantile};
use crate::univariate::PosteriorSummary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationMode {
    /// Bernoulli outcomes per patient, reduced by the first stage.
    Patient,
    /// Crude effects drawn directly as `N(theta, s2)`.
    #[default]
    Crude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "snake_case", deny_unknown_fields)]
pub enum PatientCount {
    Fixed { n: u64 },
    Poisson { mean: f64 },
    /// Poisson with a gamma-distributed mean (negative binomial sizes).
    GammaPoisson { mean: f64, shape: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TruePrior {
    /// Independent `N(mu, tau2)` effects in every year.
    Univariate { mu: f64, tau2: f64 },
    /// `MVN(mean, cov)` across the configured years.
    Longitudinal { mean: Vec<f64>, cov: Vec<Vec<f64>> },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub n_centres: usize,
    pub years: Vec<i32>,
    #[serde(default)]
    pub mode: SimulationMode,
    pub patients: PatientCount,
    pub baseline_rate: f64,
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default = "one")]
    pub information_scale: f64,
    pub prior: TruePrior,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_centres == 0 {
            return Err(Error::invalid("n_centres must be positive"));
        }
        if self.years.is_empty() || self.years.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("years must be non-empty and strictly increasing"));
        }
        if !(self.baseline_rate > 0.0 && self.baseline_rate < 1.0) {
            return Err(Error::invalid(format!("baseline_rate {} not in (0, 1)", self.baseline_rate)));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("beta entries must be finite"));
        }
        if !(self.information_scale > 0.0 && self.information_scale.is_finite()) {
            return Err(Error::invalid("information_scale must be positive"));
        }
        match self.patients {
            PatientCount::Fixed { n } if n == 0 => {
                return Err(Error::invalid("fixed patient count must be positive"))
            }
            PatientCount::Poisson { mean } if !(mean > 0.0 && mean.is_finite()) => {
                return Err(Error::invalid(format!("poisson mean {mean} must be positive")))
            }
            PatientCount::GammaPoisson { mean, shape }
                if !(mean > 0.0 && mean.is_finite() && shape > 0.0 && shape.is_finite()) =>
            {
                return Err(Error::invalid("gamma_poisson mean and shape must be positive"))
            }
            _ => {}
        }
        match &self.prior {
            TruePrior::Univariate { mu, tau2 } => {
                if !mu.is_finite() || !(*tau2 >= 0.0 && tau2.is_finite()) {
                    return Err(Error::invalid("prior needs finite mu and tau2 >= 0"));
                }
            }
            TruePrior::Longitudinal { mean, cov } => {
                let j = self.years.len();
                if mean.len() != j || cov.len() != j || cov.iter().any(|r| r.len() != j) {
                    return Err(Error::invalid(format!("longitudinal prior must match {j} years")));
                }
                let t = DMatrix::from_fn(j, j, |a, b| cov[a][b]);
                if (&t - t.transpose()).amax() > 1e-12 {
                    return Err(Error::invalid("prior covariance is not symmetric"));
                }
                if crate::linalg::min_eigenvalue(&t) < -1e-10 {
                    return Err(Error::invalid("prior covariance is not positive semidefinite"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub centres: Vec<String>,
    pub years: Vec<i32>,
    /// `true_effects[i][j]` for centre `i`, year `j`.
    pub true_effects: Vec<Vec<f64>>,
    /// Linear-predictor intercept giving the configured marginal rate.
    pub intercept: f64,
    pub patients: Option<Vec<PatientRecord>>,
    pub summaries: Option<Vec<CentreYearSummary>>,
    pub crudes: Vec<CrudeEffect>,
}

impl SyntheticDataset {
    pub fn panel(&self) -> Result<Panel> {
        assemble_panel(&self.crudes)
    }

    /// Crude effects of one year.
    pub fn year(&self, year: i32) -> Vec<CrudeEffect> {
        self.crudes.iter().filter(|c| c.year == year).cloned().collect()
    }
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Deterministic sub-stream of `seed` named by `label`.
pub fn substream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(label));
    rng
}

/// Centre identifiers `C001`, `C002`, ...
pub fn centre_id(i: usize) -> String {
    format!("C{:03}", i + 1)
}

const QUADRATURE: usize = 400;

fn normal_nodes() -> Vec<f64> {
    (0..QUADRATURE)
        .map(|k| norm_quantile((k as f64 + 0.5) / QUADRATURE as f64))
        .collect()
}

/// `E[f(a + sigma Z)]` over a standard normal `Z`.
fn normal_expectation(nodes: &[f64], a: f64, sigma: f64, f: impl Fn(f64) -> f64) -> f64 {
    nodes.iter().map(|z| f(a + sigma * z)).sum::<f64>() / nodes.len() as f64
}

/// Intercept `a` with `E[expit(a + x'beta)] = rate` for standard normal `x`.
pub fn calibrate_intercept(rate: f64, beta: &[f64]) -> f64 {
    let sigma = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
    if sigma == 0.0 {
        return logit(rate);
    }
    let nodes = normal_nodes();
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_expectation(&nodes, mid, sigma, expit) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn draw_count(rng: &mut ChaCha8Rng, dist: &PatientCount) -> Result<u64> {
    let lambda = match *dist {
        PatientCount::Fixed { n } => return Ok(n),
        PatientCount::Poisson { mean } => mean,
        PatientCount::GammaPoisson { mean, shape } => Gamma::new(shape, mean / shape)
            .map_err(|e| Error::invalid(format!("gamma_poisson: {e}")))?
            .sample(rng),
    };
    if lambda <= 0.0 {
        return Ok(0);
    }
    let n: f64 = Poisson::new(lambda)
        .map_err(|e| Error::invalid(format!("poisson: {e}")))?
        .sample(rng);
    Ok(n as u64)
}

/// Square root `L` with `L L' = t`, tolerating singular `t`.
fn psd_root(t: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = t.clone().symmetric_eigen();
    let mut v = eig.eigenvectors;
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        v.column_mut(k).scale_mut(s);
    }
    v
}

fn true_effects(config: &ScenarioConfig) -> Vec<Vec<f64>> {
    let j = config.years.len();
    let draw = |i: usize| -> Vec<f64> {
        let mut rng = substream(config.seed, &format!("effects/{}", centre_id(i)));
        let z: Vec<f64> = (0..j).map(|_| rng.sample(StandardNormal)).collect();
        match &config.prior {
            TruePrior::Univariate { mu, tau2 } => z.iter().map(|z| mu + tau2.sqrt() * z).collect(),
            TruePrior::Longitudinal { mean, cov } => {
                let t = DMatrix::from_fn(j, j, |a, b| cov[a][b]);
                let l = psd_root(&t);
                let e = l * DVector::from_vec(z);
                mean.iter().zip(e.iter()).map(|(m, e)| m + e).collect()
            }
        }
    };
    (0..config.n_centres).into_par_iter().map(draw).collect()
}

/// Draws a synthetic dataset. Centre-years without patients are missing.
pub fn simulate(config: &ScenarioConfig) -> Result<SyntheticDataset> {
    config.validate()?;
    let centres: Vec<String> = (0..config.n_centres).map(centre_id).collect();
    let effects = true_effects(config);
    let intercept = calibrate_intercept(config.baseline_rate, &config.beta);
    let counts: Vec<Vec<u64>> = (0..config.n_centres)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(config.seed, &format!("counts/{}", centres[i]));
            config
                .years
                .iter()
                .map(|_| draw_count(&mut rng, &config.patients))
                .collect::<Result<Vec<u64>>>()
        })
        .collect::<Result<_>>()?;
    let mut data = SyntheticDataset {
        centres,
        years: config.years.clone(),
        true_effects: effects,
        intercept,
        patients: None,
        summaries: None,
        crudes: Vec::new(),
    };
    match config.mode {
        SimulationMode::Crude => simulate_crude(config, &counts, &mut data),
        SimulationMode::Patient => simulate_patients(config, &counts, &mut data)?,
    }
    Ok(data)
}

fn simulate_crude(config: &ScenarioConfig, counts: &[Vec<u64>], data: &mut SyntheticDataset) {
    let nodes = normal_nodes();
    let sigma = config.beta.iter().map(|b| b * b).sum::<f64>().sqrt();
    let crudes: Vec<Vec<CrudeEffect>> = (0..config.n_centres)
        .into_par_iter()
        .map(|i| {
            let id = &data.centres[i];
            let mut rng = substream(config.seed, &format!("noise/{id}"));
            let mut out = Vec::new();
            for (j, &year) in config.years.iter().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                let n = counts[i][j];
                if n == 0 {
                    continue;
                }
                let theta = data.true_effects[i][j];
                let per_patient =
                    normal_expectation(&nodes, data.intercept + theta, sigma, |e| {
                        let p = expit(e);
                        p * (1.0 - p)
                    });
                let info = n as f64 * per_patient * config.information_scale;
                let s2 = 1.0 / info;
                out.push(CrudeEffect {
                    centre_id: id.clone(),
                    year,
                    theta_hat: theta + s2.sqrt() * z,
                    s2,
                });
            }
            out
        })
        .collect();
    data.crudes = crudes.into_iter().flatten().collect();
}

fn simulate_patients(
    config: &ScenarioConfig,
    counts: &[Vec<u64>],
    data: &mut SyntheticDataset,
) -> Result<()> {
    let p = config.beta.len();
    let per_centre: Vec<Vec<PatientRecord>> = (0..config.n_centres)
        .into_par_iter()
        .map(|i| {
            let id = &data.centres[i];
            let mut out = Vec::new();
            for (j, &year) in config.years.iter().enumerate() {
                let mut rng = substream(config.seed, &format!("patients/{id}/{year}"));
                let theta = data.true_effects[i][j];
                for _ in 0..counts[i][j] {
                    let mut x = Vec::with_capacity(p + 1);
                    x.push(1.0);
                    let mut eta = data.intercept + theta;
                    for b in &config.beta {
                        let v: f64 = rng.sample(StandardNormal);
                        eta += b * v;
                        x.push(v);
                    }
                    let y = u8::from(rng.random::<f64>() < expit(eta));
                    out.push(PatientRecord {
                        centre_id: id.clone(),
                        year,
                        outcome: y,
                        covariates: x,
                    });
                }
            }
            out
        })
        .collect();
    let patients: Vec<PatientRecord> = per_centre.into_iter().flatten().collect();
    let mut summaries = Vec::new();
    for &year in &config.years {
        let cohort: Vec<PatientRecord> = patients.iter().filter(|r| r.year == year).cloned().collect();
        if cohort.is_empty() {
            continue;
        }
        let beta = stage1::fit_logistic(&cohort)?;
        summaries.extend(stage1::summarize(&cohort, &beta)?);
    }
    let (crudes, _) = stage1::crude_effects(&summaries, DEFAULT_MIN_INFORMATION);
    data.crudes = crudes;
    data.summaries = Some(summaries);
    data.patients = Some(patients);
    Ok(())
}

/// Monte-Carlo expected ranks with their standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct McRanks {
    pub er: Vec<f64>,
    pub se: Vec<f64>,
}

const MC_CHUNK: usize = 10_000;

/// Expected ranks by sampling every posterior independently and averaging
/// the per-draw (mid)ranks.
pub fn mc_expected_rank(posteriors: &[PosteriorSummary], n_draws: usize, seed: u64) -> Result<McRanks> {
    if n_draws < 2 {
        return Err(Error::invalid("mc_expected_rank needs at least 2 draws"));
    }
    if posteriors.iter().any(|p| !p.ebe.is_finite() || !(p.pv >= 0.0)) {
        return Err(Error::invalid("posteriors need finite means and non-negative variances"));
    }
    let n = posteriors.len();
    let chunks = n_draws.div_ceil(MC_CHUNK);
    let partial: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, &format!("mc-rank/{c}"));
            let draws = MC_CHUNK.min(n_draws - c * MC_CHUNK);
            let mut sum = vec![0.0; n];
            let mut sum2 = vec![0.0; n];
            let mut theta = vec![0.0; n];
            for _ in 0..draws {
                for (t, p) in theta.iter_mut().zip(posteriors) {
                    let z: f64 = rng.sample(StandardNormal);
                    *t = p.ebe + p.pv.sqrt() * z;
                }
                for (k, r) in midranks(&theta).into_iter().enumerate() {
                    sum[k] += r;
                    sum2[k] += r * r;
                }
            }
            (sum, sum2)
        })
        .collect();
    let mut sum = vec![0.0; n];
    let mut sum2 = vec![0.0; n];
    for (s, s2) in partial {
        for k in 0..n {
            sum[k] += s[k];
            sum2[k] += s2[k];
        }
    }
    let m = n_draws as f64;
    let er: Vec<f64> = sum.iter().map(|s| s / m).collect();
    let se = (0..n)
        .map(|k| {
            let var = ((sum2[k] - m * er[k] * er[k]) / (m - 1.0)).max(0.0);
            (var / m).sqrt()
        })
        .collect();
    Ok(McRanks { er, se })
}

/// Conditional law of the unobserved coordinates of `MVN(mean, cov)` given
/// the observed ones, read off the joint precision matrix (LU inverse):
/// `Cov = P_uu^-1`, `E = m_u - P_uu^-1 P_uo (x_o - m_o)`.
///
/// Returns the free coordinates in increasing index order.
pub fn mvn_condition_oracle(
    mean: &[f64],
    cov: &DMatrix<f64>,
    observed: &[usize],
    values: &[f64],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let d = mean.len();
    if cov.nrows() != d || cov.ncols() != d {
        return Err(Error::invalid("covariance does not match the mean"));
    }
    if observed.len() != values.len() {
        return Err(Error::invalid("one value per observed index"));
    }
    if observed.iter().any(|&k| k >= d) {
        return Err(Error::invalid("observed index out of range"));
    }
    let free: Vec<usize> = (0..d).filter(|k| !observed.contains(k)).collect();
    let m_free = DVector::from_iterator(free.len(), free.iter().map(|&k| mean[k]));
    if observed.is_empty() {
        return Ok((m_free, crate::linalg::select(cov, &free, &free)));
    }
    let precision = cov.clone().lu().try_inverse().ok_or_else(|| Error::Singular {
        context: "joint covariance".into(),
        condition: f64::INFINITY,
    })?;
    let p_uu = crate::linalg::select(&precision, &free, &free);
    let p_uo = crate::linalg::select(&precision, &free, observed);
    let cond_cov = p_uu.lu().try_inverse().ok_or_else(|| Error::Singular {
        context: "conditional precision".into(),
        condition: f64::INFINITY,
    })?;
    let resid = DVector::from_iterator(observed.len(), observed.iter().zip(values).map(|(&k, v)| v - mean[k]));
    let cond_mean = m_free - &cond_cov * (p_uo * resid);
    Ok((cond_mean, cond_cov))
}
