//! Multivariate normal models for the centre x year panel of crude effects,
//! extrapolation to the next year and predictive distributions.
//!
//! The panel is modelled as `theta_hat_i | Theta_i ~ MVN(Theta_i, S_i)` with
//! diagonal `S_i` and `Theta_i ~ MVN(M, T)`. Four covariance structures are
//! supported for `T`: unstructured, compound symmetry, stationary AR(1)
//! (`T_jk = tau^2 rho^|year_j - year_k|`) and random coefficients
//! (`theta_ij = A_i + B_i (year_j - origin)`). Missing centre-years are
//! handled by restricting each centre's likelihood to its observed years.

mod em;
mod panel;
mod predict;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::median;
use crate::univariate;

pub use em::LongitudinalOptions;
use em::{centre_obs, CovModel, MixedFit, MixedSpec, MixedState};
pub use panel::{assemble_panel, Panel};
pub use predict::{
    extrapolate, predict_next, predict_panel, predictive_ranking, Extrapolation,
    ExtrapolationPolicy, PredictiveDistribution,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    Unstructured,
    CompoundSymmetry,
    Ar1,
    RandomCoefficients,
}

impl Structure {
    pub fn short_name(self) -> &'static str {
        match self {
            Structure::Unstructured => "unstructured",
            Structure::CompoundSymmetry => "cs",
            Structure::Ar1 => "ar1",
            Structure::RandomCoefficients => "rc",
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Structure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unstructured" | "un" => Ok(Structure::Unstructured),
            "cs" | "compound_symmetry" | "compound-symmetry" => Ok(Structure::CompoundSymmetry),
            "ar1" => Ok(Structure::Ar1),
            "rc" | "random_coefficients" | "random-coefficients" => Ok(Structure::RandomCoefficients),
            other => Err(Error::invalid(format!(
                "unknown covariance structure `{other}` (expected unstructured, cs, ar1 or rc)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongitudinalModel {
    pub structure: Structure,
    pub years: Vec<i32>,
    /// Mean vector M, one entry per year.
    pub mean: Vec<f64>,
    /// Covariance T of the true effects, row-major nested.
    pub cov: Vec<Vec<f64>>,
    /// Named structure parameters (`tau2`, `rho`, `rho_cs`, `alpha`, `beta`,
    /// `tau2_a`, `tau2_b`, `rho_ab`).
    pub structure_params: BTreeMap<String, f64>,
    /// Reference year for the random-coefficients time scale `year - origin`.
    pub time_origin: i32,
    pub log_likelihood: f64,
    pub n_mean_params: usize,
    pub n_cov_params: usize,
    pub iterations: usize,
    pub converged: bool,
    /// The unstructured M-step needed a positive-semidefinite projection.
    pub psd_projected: bool,
    /// A profiled correlation ended on its search boundary.
    pub boundary_flag: bool,
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(skip)]
    pub trace: Vec<f64>,
}

impl LongitudinalModel {
    pub fn t_matrix(&self) -> DMatrix<f64> {
        let j = self.years.len();
        DMatrix::from_fn(j, j, |a, b| self.cov[a][b])
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.structure_params.get(name).copied()
    }

    /// Model assembled from given parameters without fitting (for example
    /// published estimates). `mean` is required for unstructured, AR(1) and
    /// compound symmetry; random coefficients derive it from `alpha`/`beta`.
    pub fn from_params(
        structure: Structure,
        years: Vec<i32>,
        mean: Option<Vec<f64>>,
        params: BTreeMap<String, f64>,
        time_origin: Option<i32>,
        log_likelihood: f64,
    ) -> Result<Self> {
        if years.is_empty() || years.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("years must be non-empty and strictly increasing"));
        }
        let origin = time_origin.unwrap_or(years[0] - 1);
        let t = build_structured_t(structure, &params, &years, origin)?;
        let j = years.len();
        let mean = match structure {
            Structure::RandomCoefficients => {
                let (a, b) = (req(&params, "alpha")?, req(&params, "beta")?);
                years.iter().map(|y| a + b * f64::from(y - origin)).collect()
            }
            _ => mean.ok_or_else(|| Error::invalid("mean vector required for this structure"))?,
        };
        if mean.len() != j {
            return Err(Error::invalid(format!("mean has {} entries for {j} years", mean.len())));
        }
        let (n_mean_params, n_cov_params) = param_counts(structure, j);
        Ok(LongitudinalModel {
            structure,
            years,
            mean,
            cov: to_nested(&t),
            structure_params: params,
            time_origin: origin,
            log_likelihood,
            n_mean_params,
            n_cov_params,
            iterations: 0,
            converged: true,
            psd_projected: false,
            boundary_flag: false,
            notes: vec!["parameters supplied, not fitted".into()],
            trace: Vec::new(),
        })
    }
}

fn req(params: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
    params
        .get(key)
        .copied()
        .ok_or_else(|| Error::invalid(format!("missing structure parameter `{key}`")))
}

fn to_nested(t: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..t.nrows()).map(|a| (0..t.ncols()).map(|b| t[(a, b)]).collect()).collect()
}

pub(crate) fn param_counts(structure: Structure, j: usize) -> (usize, usize) {
    match structure {
        Structure::Unstructured => (j, j * (j + 1) / 2),
        Structure::CompoundSymmetry | Structure::Ar1 => (j, 2),
        Structure::RandomCoefficients => (2, 3),
    }
}

/// Covariance matrix of a structured model at the given years.
pub fn build_structured_t(
    structure: Structure,
    params: &BTreeMap<String, f64>,
    years: &[i32],
    time_origin: i32,
) -> Result<DMatrix<f64>> {
    let j = years.len();
    match structure {
        Structure::Unstructured => Err(Error::invalid(
            "an unstructured covariance has no parametric form",
        )),
        Structure::Ar1 => {
            let tau2 = req(params, "tau2")?;
            let rho = req(params, "rho")?;
            if !(tau2 >= 0.0) || !(rho.abs() <= 1.0) {
                return Err(Error::invalid(format!("ar1 needs tau2 >= 0 and |rho| <= 1, got {tau2}, {rho}")));
            }
            Ok(DMatrix::from_fn(j, j, |a, b| {
                tau2 * rho.powi((years[a] - years[b]).abs())
            }))
        }
        Structure::CompoundSymmetry => {
            let tau2 = req(params, "tau2")?;
            let rho = req(params, "rho_cs")?;
            let lower = if j > 1 { -1.0 / (j as f64 - 1.0) } else { -1.0 };
            if !(tau2 >= 0.0) || !(rho >= lower && rho <= 1.0) {
                return Err(Error::invalid(format!(
                    "compound symmetry needs tau2 >= 0 and {lower} <= rho_cs <= 1, got {tau2}, {rho}"
                )));
            }
            Ok(DMatrix::from_fn(j, j, |a, b| if a == b { tau2 } else { tau2 * rho }))
        }
        Structure::RandomCoefficients => {
            let ta = req(params, "tau2_a")?;
            let tb = req(params, "tau2_b")?;
            let r = req(params, "rho_ab")?;
            if !(ta >= 0.0) || !(tb >= 0.0) || !(r.abs() <= 1.0) {
                return Err(Error::invalid(format!(
                    "random coefficients need tau2_a, tau2_b >= 0 and |rho_ab| <= 1, got {ta}, {tb}, {r}"
                )));
            }
            let cab = r * (ta * tb).sqrt();
            let t: Vec<f64> = years.iter().map(|y| f64::from(y - time_origin)).collect();
            Ok(DMatrix::from_fn(j, j, |a, b| {
                ta + cab * (t[a] + t[b]) + tb * (t[a] * t[b])
            }))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    pub log_likelihood: f64,
    /// `log_likelihood - n_params` (larger is better).
    pub aic: f64,
    /// `-2 log_likelihood + 2 n_params` (smaller is better).
    pub aic_textbook: f64,
    pub n_params: usize,
}

pub fn model_fit_stats(model: &LongitudinalModel) -> FitStats {
    fit_stats(model.log_likelihood, model.n_mean_params + model.n_cov_params)
}

pub fn fit_stats(log_likelihood: f64, n_params: usize) -> FitStats {
    let k = n_params as f64;
    FitStats {
        log_likelihood,
        aic: log_likelihood - k,
        aic_textbook: -2.0 * log_likelihood + 2.0 * k,
        n_params,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StructuredOptions {
    pub em: LongitudinalOptions,
    /// Fix the AR(1) / compound-symmetry correlation instead of profiling it.
    pub fixed_rho: Option<f64>,
    /// Random coefficients with the slope variance held at zero.
    pub zero_slope_variance: bool,
    /// Reference year for random coefficients; defaults to the first year - 1.
    pub time_origin: Option<i32>,
    /// Bracket width at which the golden-section search stops.
    pub rho_tolerance: f64,
}

impl Default for StructuredOptions {
    fn default() -> Self {
        StructuredOptions {
            em: LongitudinalOptions::default(),
            fixed_rho: None,
            zero_slope_variance: false,
            time_origin: None,
            rho_tolerance: 1e-5,
        }
    }
}

const RHO_BOUND: f64 = 0.999;

/// Starting variance: spread of the crude effects beyond their median
/// sampling variance, floored at a tenth of that median.
fn initial_variance(panel: &Panel, year: Option<usize>) -> f64 {
    let (theta, s2): (Vec<f64>, Vec<f64>) = (0..panel.n_centres())
        .flat_map(|i| {
            (0..panel.n_years())
                .filter(move |&j| year.is_none_or(|y| y == j))
                .filter_map(move |j| panel.get(i, j))
        })
        .unzip();
    let n = theta.len() as f64;
    let mean = theta.iter().sum::<f64>() / n;
    let var = theta.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let med = median(&s2).unwrap_or(1.0);
    (var - med).max(0.1 * med)
}

fn check_pairs(panel: &Panel) -> Result<()> {
    let j = panel.n_years();
    for a in 0..j {
        for b in a..j {
            let count = panel.joint_count(a, b);
            if count < 2 {
                return Err(Error::NotIdentifiable {
                    year_a: panel.years[a],
                    year_b: panel.years[b],
                    count,
                });
            }
        }
    }
    Ok(())
}

fn single_year_model(panel: &Panel, structure: Structure, origin: i32) -> Result<LongitudinalModel> {
    let prior = univariate::fit_prior_mle(&panel.year_slice(0))?;
    let mut params = BTreeMap::new();
    match structure {
        Structure::Unstructured => {}
        Structure::Ar1 => {
            params.insert("tau2".into(), prior.tau2);
            params.insert("rho".into(), 0.0);
        }
        Structure::CompoundSymmetry => {
            params.insert("tau2".into(), prior.tau2);
            params.insert("rho_cs".into(), 0.0);
        }
        Structure::RandomCoefficients => {
            params.insert("alpha".into(), prior.mu);
            params.insert("beta".into(), 0.0);
            params.insert("tau2_a".into(), prior.tau2);
            params.insert("tau2_b".into(), 0.0);
            params.insert("rho_ab".into(), 0.0);
        }
    }
    let (n_mean_params, n_cov_params) = (1, 1);
    Ok(LongitudinalModel {
        structure,
        years: panel.years.clone(),
        mean: vec![prior.mu],
        cov: vec![vec![prior.tau2]],
        structure_params: params,
        time_origin: origin,
        log_likelihood: prior.log_likelihood,
        n_mean_params,
        n_cov_params,
        iterations: prior.iterations,
        converged: prior.converged,
        psd_projected: false,
        boundary_flag: prior.at_boundary,
        notes: vec!["single year: reduces to the univariate normal prior".into()],
        trace: prior.trace,
    })
}

/// Saturated model: free mean per year and unstructured T.
pub fn fit_unstructured(panel: &Panel) -> Result<LongitudinalModel> {
    fit_unstructured_with(panel, &LongitudinalOptions::default())
}

pub fn fit_unstructured_with(panel: &Panel, opts: &LongitudinalOptions) -> Result<LongitudinalModel> {
    let j = panel.n_years();
    if j == 0 {
        return Err(Error::invalid("panel has no years"));
    }
    if j == 1 {
        return single_year_model(panel, Structure::Unstructured, panel.years[0] - 1);
    }
    check_pairs(panel)?;
    let obs = centre_obs(panel);
    let spec = MixedSpec {
        centres: &obs,
        x: DMatrix::identity(j, j),
        z: DMatrix::identity(j, j),
        cov: CovModel::Free,
    };
    let init = MixedState {
        gamma: DVector::zeros(j),
        sigma: DMatrix::from_diagonal(&DVector::from_fn(j, |k, _| initial_variance(panel, Some(k)))),
    };
    let fit = spec.fit(init, opts)?;
    let t = fit.state.sigma.clone();
    let (n_mean_params, n_cov_params) = param_counts(Structure::Unstructured, j);
    let mut notes = Vec::new();
    if fit.psd_projected {
        notes.push("covariance projected to the positive-semidefinite cone".into());
    }
    if !fit.converged {
        notes.push(format!("EM stopped at the iteration limit ({})", opts.max_iterations));
    }
    Ok(LongitudinalModel {
        structure: Structure::Unstructured,
        years: panel.years.clone(),
        mean: fit.state.gamma.iter().cloned().collect(),
        cov: to_nested(&t),
        structure_params: BTreeMap::new(),
        time_origin: panel.years[0] - 1,
        log_likelihood: fit.log_likelihood,
        n_mean_params,
        n_cov_params,
        iterations: fit.iterations,
        converged: fit.converged,
        psd_projected: fit.psd_projected,
        boundary_flag: false,
        notes,
        trace: fit.trace,
    })
}

pub fn fit_structured(panel: &Panel, structure: Structure) -> Result<LongitudinalModel> {
    fit_structured_with(panel, structure, &StructuredOptions::default())
}

pub fn fit_structured_with(
    panel: &Panel,
    structure: Structure,
    opts: &StructuredOptions,
) -> Result<LongitudinalModel> {
    let j = panel.n_years();
    if j == 0 {
        return Err(Error::invalid("panel has no years"));
    }
    let origin = opts.time_origin.unwrap_or(panel.years[0] - 1);
    if j == 1 {
        return single_year_model(panel, structure, origin);
    }
    for k in 0..j {
        if panel.joint_count(k, k) == 0 {
            return Err(Error::NotIdentifiable {
                year_a: panel.years[k],
                year_b: panel.years[k],
                count: 0,
            });
        }
    }
    match structure {
        Structure::Unstructured => Err(Error::invalid(
            "use fit_unstructured for the saturated model",
        )),
        Structure::Ar1 | Structure::CompoundSymmetry => fit_profiled(panel, structure, opts),
        Structure::RandomCoefficients => fit_random_coefficients(panel, origin, opts),
    }
}

fn correlation_shape(structure: Structure, years: &[i32], rho: f64) -> DMatrix<f64> {
    let j = years.len();
    match structure {
        Structure::Ar1 => DMatrix::from_fn(j, j, |a, b| rho.powi((years[a] - years[b]).abs())),
        _ => DMatrix::from_fn(j, j, |a, b| if a == b { 1.0 } else { rho }),
    }
}

fn fit_profiled(panel: &Panel, structure: Structure, opts: &StructuredOptions) -> Result<LongitudinalModel> {
    let j = panel.n_years();
    let obs = centre_obs(panel);
    let x = DMatrix::identity(j, j);
    let v0 = initial_variance(panel, None);

    // Inner fit at a fixed correlation, warm-started from `warm`.
    let eval = |rho: f64, warm: Option<&MixedState>| -> Result<MixedFit> {
        let tau2 = warm
            .map(|w| w.sigma.diagonal().mean())
            .unwrap_or(v0);
        let gamma = warm.map(|w| w.gamma.clone()).unwrap_or_else(|| DVector::zeros(j));
        if structure == Structure::CompoundSymmetry && rho >= 1.0 {
            // Perfect correlation: a single shared random intercept.
            let spec = MixedSpec {
                centres: &obs,
                x: x.clone(),
                z: DMatrix::from_element(j, 1, 1.0),
                cov: CovModel::Scaled(DMatrix::from_element(1, 1, 1.0)),
            };
            let init = MixedState { gamma, sigma: DMatrix::from_element(1, 1, tau2) };
            let mut fit = spec.fit(init, &opts.em)?;
            let t = fit.state.sigma[(0, 0)];
            fit.state.sigma = DMatrix::from_element(j, j, t);
            return Ok(fit);
        }
        let shape = correlation_shape(structure, &panel.years, rho);
        let spec = MixedSpec {
            centres: &obs,
            x: x.clone(),
            z: DMatrix::identity(j, j),
            cov: CovModel::Scaled(shape.clone()),
        };
        let init = MixedState { gamma, sigma: shape * tau2 };
        spec.fit(init, &opts.em)
    };

    let lower = match structure {
        Structure::CompoundSymmetry => (-RHO_BOUND).max(-1.0 / (j as f64 - 1.0) + 1e-3),
        _ => -RHO_BOUND,
    };
    let upper = RHO_BOUND;

    let (rho, fit, at_bound) = if let Some(rho) = opts.fixed_rho {
        (rho, eval(rho, None)?, false)
    } else {
        // Coarse scan, then golden-section refinement around the best point.
        let grid_n = 21;
        let grid: Vec<f64> = (0..grid_n)
            .map(|k| lower + (upper - lower) * k as f64 / (grid_n - 1) as f64)
            .collect();
        let mut warm: Option<MixedState> = None;
        let mut best: Option<(usize, f64, MixedState)> = None;
        for (k, &r) in grid.iter().enumerate() {
            let f = eval(r, warm.as_ref())?;
            if best.as_ref().is_none_or(|b| f.log_likelihood > b.1) {
                best = Some((k, f.log_likelihood, f.state.clone()));
            }
            warm = Some(f.state);
        }
        let (k, _, best_state) = best.expect("non-empty grid");
        let mut a = grid[k.saturating_sub(1)];
        let mut b = grid[(k + 1).min(grid_n - 1)];
        let invphi = (5f64.sqrt() - 1.0) / 2.0;
        let mut warm = best_state;
        let mut c = b - invphi * (b - a);
        let mut d = a + invphi * (b - a);
        let fc_fit = eval(c, Some(&warm))?;
        let mut fc = fc_fit.log_likelihood;
        let fd_fit = eval(d, Some(&fc_fit.state))?;
        let mut fd = fd_fit.log_likelihood;
        warm = fd_fit.state;
        while (b - a).abs() > opts.rho_tolerance {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - invphi * (b - a);
                let f = eval(c, Some(&warm))?;
                fc = f.log_likelihood;
                warm = f.state;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + invphi * (b - a);
                let f = eval(d, Some(&warm))?;
                fd = f.log_likelihood;
                warm = f.state;
            }
        }
        let mut rho = 0.5 * (a + b);
        let mut fit = eval(rho, Some(&warm))?;
        // The grid point can beat the refined interior when the profile is flat.
        if grid[k] == lower || grid[k] == upper {
            let edge = eval(grid[k], Some(&warm))?;
            if edge.log_likelihood > fit.log_likelihood {
                rho = grid[k];
                fit = edge;
            }
        }
        let at_bound = (rho - lower).abs() < 2e-3 || (upper - rho).abs() < 2e-3;
        (rho, fit, at_bound)
    };

    let tau2 = if structure == Structure::CompoundSymmetry && rho >= 1.0 {
        fit.state.sigma[(0, 0)]
    } else {
        fit.state.sigma.diagonal().mean()
    };
    let mut params = BTreeMap::new();
    params.insert("tau2".to_string(), tau2);
    let rho_key = if structure == Structure::Ar1 { "rho" } else { "rho_cs" };
    params.insert(rho_key.to_string(), rho);
    let t = build_structured_t(structure, &params, &panel.years, panel.years[0] - 1)?;
    let (n_mean_params, n_cov_params) = param_counts(structure, j);
    let mut notes = Vec::new();
    if at_bound {
        log::warn!("{structure}: profile likelihood maximised at the search boundary (rho = {rho:.4})");
        notes.push(format!("profile maximum at search boundary (rho = {rho:.4})"));
    }
    if !fit.converged {
        notes.push(format!("EM stopped at the iteration limit ({})", opts.em.max_iterations));
    }
    Ok(LongitudinalModel {
        structure,
        years: panel.years.clone(),
        mean: fit.state.gamma.iter().cloned().collect(),
        cov: to_nested(&t),
        structure_params: params,
        time_origin: panel.years[0] - 1,
        log_likelihood: fit.log_likelihood,
        n_mean_params,
        n_cov_params,
        iterations: fit.iterations,
        converged: fit.converged,
        psd_projected: false,
        boundary_flag: at_bound,
        notes,
        trace: fit.trace,
    })
}

fn fit_random_coefficients(
    panel: &Panel,
    origin: i32,
    opts: &StructuredOptions,
) -> Result<LongitudinalModel> {
    let j = panel.n_years();
    let obs = centre_obs(panel);
    let t: Vec<f64> = panel.years.iter().map(|y| f64::from(y - origin)).collect();
    let x = DMatrix::from_fn(j, 2, |a, b| if b == 0 { 1.0 } else { t[a] });
    let v0 = initial_variance(panel, None);
    let (z, sigma0) = if opts.zero_slope_variance {
        (DMatrix::from_element(j, 1, 1.0), DMatrix::from_element(1, 1, v0))
    } else {
        let mean_t2 = t.iter().map(|v| v * v).sum::<f64>() / j as f64;
        (x.clone(), DMatrix::from_diagonal(&DVector::from_vec(vec![v0, 0.1 * v0 / mean_t2.max(1.0)])))
    };
    let spec = MixedSpec { centres: &obs, x, z, cov: CovModel::Free };
    let fit = spec.fit(MixedState { gamma: DVector::zeros(2), sigma: sigma0 }, &opts.em)?;
    let s = &fit.state.sigma;
    let (ta, tb, cab) = if opts.zero_slope_variance {
        (s[(0, 0)], 0.0, 0.0)
    } else {
        (s[(0, 0)], s[(1, 1)], s[(0, 1)])
    };
    let rho_ab = if ta > 0.0 && tb > 0.0 {
        (cab / (ta * tb).sqrt()).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    let mut params = BTreeMap::new();
    params.insert("alpha".to_string(), fit.state.gamma[0]);
    params.insert("beta".to_string(), fit.state.gamma[1]);
    params.insert("tau2_a".to_string(), ta);
    params.insert("tau2_b".to_string(), tb);
    params.insert("rho_ab".to_string(), rho_ab);
    let tmat = build_structured_t(Structure::RandomCoefficients, &params, &panel.years, origin)?;
    let mean = t.iter().map(|tk| fit.state.gamma[0] + fit.state.gamma[1] * tk).collect();
    let (n_mean_params, n_cov_params) = param_counts(Structure::RandomCoefficients, j);
    let mut notes = Vec::new();
    if opts.zero_slope_variance {
        notes.push("slope variance held at zero".into());
    }
    if !fit.converged {
        notes.push(format!("EM stopped at the iteration limit ({})", opts.em.max_iterations));
    }
    Ok(LongitudinalModel {
        structure: Structure::RandomCoefficients,
        years: panel.years.clone(),
        mean,
        cov: to_nested(&tmat),
        structure_params: params,
        time_origin: origin,
        log_likelihood: fit.log_likelihood,
        n_mean_params,
        n_cov_params,
        iterations: fit.iterations,
        converged: fit.converged,
        psd_projected: fit.psd_projected,
        boundary_flag: false,
        notes,
        trace: fit.trace,
    })
}

/// Fits any of the four structures.
pub fn fit(panel: &Panel, structure: Structure) -> Result<LongitudinalModel> {
    match structure {
        Structure::Unstructured => fit_unstructured(panel),
        s => fit_structured(panel, s),
    }
}
