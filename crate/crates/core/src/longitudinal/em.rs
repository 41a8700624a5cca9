//! Linear mixed model with known diagonal measurement error, fitted by
//! alternating an exact GLS update of the fixed effects with an EM update of
//! the random-effect covariance:
//!
//! ```text
//! theta_hat_i = X_i gamma + Z_i u_i + e_i,   u_i ~ N(0, Sigma),   e_i ~ N(0, S_i)
//! ```
//!
//! `X_i`, `Z_i` and `S_i` are restricted to the years centre `i` was observed.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, select};

pub(crate) struct CentreObs {
    pub idx: Vec<usize>,
    pub y: DVector<f64>,
    pub s2: DVector<f64>,
}

#[derive(Clone)]
pub(crate) enum CovModel {
    /// Unrestricted positive-semidefinite `Sigma`.
    Free,
    /// `Sigma = tau2 * R` for a fixed non-singular shape `R`.
    Scaled(DMatrix<f64>),
}

pub(crate) struct MixedSpec<'a> {
    pub centres: &'a [CentreObs],
    /// One row per year.
    pub x: DMatrix<f64>,
    /// One row per year.
    pub z: DMatrix<f64>,
    pub cov: CovModel,
}

#[derive(Clone)]
pub(crate) struct MixedState {
    pub gamma: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

pub(crate) struct MixedFit {
    pub state: MixedState,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub psd_projected: bool,
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct LongitudinalOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LongitudinalOptions {
    fn default() -> Self {
        LongitudinalOptions {
            tolerance: 1e-8,
            max_iterations: 20_000,
        }
    }
}

struct CentreMats {
    x: DMatrix<f64>,
    z: DMatrix<f64>,
}

impl MixedSpec<'_> {
    fn mats(&self) -> Vec<CentreMats> {
        let pcols: Vec<usize> = (0..self.x.ncols()).collect();
        let qcols: Vec<usize> = (0..self.z.ncols()).collect();
        self.centres
            .iter()
            .map(|c| CentreMats {
                x: select(&self.x, &c.idx, &pcols),
                z: select(&self.z, &c.idx, &qcols),
            })
            .collect()
    }

    fn marginal_cov(&self, m: &CentreMats, c: &CentreObs, sigma: &DMatrix<f64>) -> DMatrix<f64> {
        let mut v = &m.z * sigma * m.z.transpose();
        for k in 0..c.idx.len() {
            v[(k, k)] += c.s2[k];
        }
        v
    }

    fn gls(&self, mats: &[CentreMats], sigma: &DMatrix<f64>) -> Result<DVector<f64>> {
        let p = self.x.ncols();
        let mut lhs = DMatrix::zeros(p, p);
        let mut rhs = DVector::zeros(p);
        for (m, c) in mats.iter().zip(self.centres) {
            let v = self.marginal_cov(m, c, sigma);
            let chol = linalg::cholesky(&v, "marginal covariance")?;
            let vinv_x = chol.solve(&m.x);
            lhs += m.x.transpose() * &vinv_x;
            rhs += vinv_x.transpose() * &c.y;
        }
        let chol = linalg::cholesky(&lhs, "fixed-effect information")?;
        Ok(chol.solve(&rhs))
    }

    fn loglik_with(&self, mats: &[CentreMats], state: &MixedState) -> Result<f64> {
        let mut ll = 0.0;
        for (m, c) in mats.iter().zip(self.centres) {
            let v = self.marginal_cov(m, c, &state.sigma);
            let chol = linalg::cholesky(&v, "marginal covariance")?;
            let r = &c.y - &m.x * &state.gamma;
            let sol = chol.solve(&r);
            let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
            ll += -0.5 * (c.idx.len() as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + r.dot(&sol));
        }
        Ok(ll)
    }

    /// One iteration: GLS for gamma, then E and M steps for Sigma.
    fn step(&self, mats: &[CentreMats], state: &MixedState) -> Result<(MixedState, bool)> {
        let gamma = self.gls(mats, &state.sigma)?;
        let q = self.z.ncols();
        let mut acc = DMatrix::zeros(q, q);
        for (m, c) in mats.iter().zip(self.centres) {
            let v = self.marginal_cov(m, c, &state.sigma);
            let chol = linalg::cholesky(&v, "marginal covariance")?;
            let r = &c.y - &m.x * &gamma;
            // Cov(u, y) = Sigma Z'
            let sz = &state.sigma * m.z.transpose();
            let mean_u = &sz * chol.solve(&r);
            let cond = &state.sigma - &sz * chol.solve(&sz.transpose());
            acc += &mean_u * mean_u.transpose() + cond;
        }
        acc /= self.centres.len() as f64;
        let mut projected = false;
        let sigma = match &self.cov {
            CovModel::Free => {
                let (s, changed) = linalg::project_psd(&acc);
                projected = changed && linalg::min_eigenvalue(&acc) < -1e-12;
                (&s + s.transpose()) * 0.5
            }
            CovModel::Scaled(shape) => {
                let chol = linalg::cholesky(shape, "covariance shape")?;
                let tau2 = chol.solve(&acc).trace() / q as f64;
                shape * tau2.max(0.0)
            }
        };
        Ok((MixedState { gamma, sigma }, projected))
    }

    /// Covariance after a squared extrapolation step from `s0` along the EM
    /// path `s0 -> s1 -> s2`, or `None` when it leaves the parameter space.
    fn extrapolated(&self, s0: &DMatrix<f64>, s1: &DMatrix<f64>, s2: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        let r = s1 - s0;
        let v = s2 - s1 - &r;
        let (rn, vn) = (r.norm(), v.norm());
        if vn <= 0.0 || !rn.is_finite() {
            return None;
        }
        let alpha = (-rn / vn).min(-1.0);
        let next = s0 - &r * (2.0 * alpha) + &v * (alpha * alpha);
        match &self.cov {
            CovModel::Free => Some(linalg::project_psd(&next).0),
            CovModel::Scaled(_) => (next.diagonal().min() >= 0.0).then_some(next),
        }
    }

    /// EM with squared extrapolation (SQUAREM). Each cycle takes two EM
    /// steps and then tries a jump along their path; the jump is kept only
    /// if one further EM step from it beats the plain path, so every
    /// recorded log-likelihood is at least the one before it.
    pub fn fit(&self, init: MixedState, opts: &LongitudinalOptions) -> Result<MixedFit> {
        if self.centres.is_empty() {
            return Err(Error::invalid("no centres to fit"));
        }
        let mats = self.mats();
        let mut state = init;
        state.gamma = self.gls(&mats, &state.sigma)?;
        let mut ll = self.loglik_with(&mats, &state)?;
        let mut trace = vec![ll];
        let mut converged = false;
        let mut psd_projected = false;
        let mut iterations = 0;
        'outer: while iterations < opts.max_iterations {
            let mut path = vec![state.sigma.clone()];
            let mut current = state.clone();
            for _ in 0..2 {
                iterations += 1;
                let (next, projected) = self.step(&mats, &current)?;
                psd_projected |= projected;
                let new_ll = self.loglik_with(&mats, &next)?;
                trace.push(new_ll);
                let change = (new_ll - ll).abs();
                path.push(next.sigma.clone());
                current = next;
                ll = new_ll;
                if change < opts.tolerance || iterations >= opts.max_iterations {
                    state = current;
                    converged = change < opts.tolerance;
                    break 'outer;
                }
            }
            state = current;
            let Some(sigma) = self.extrapolated(&path[0], &path[1], &path[2]) else {
                continue;
            };
            let jump = match self.gls(&mats, &sigma) {
                Ok(gamma) => MixedState { gamma, sigma },
                Err(_) => continue,
            };
            iterations += 1;
            let Ok((next, projected)) = self.step(&mats, &jump) else {
                continue;
            };
            if let Ok(new_ll) = self.loglik_with(&mats, &next) {
                if new_ll > ll {
                    psd_projected |= projected;
                    trace.push(new_ll);
                    let change = new_ll - ll;
                    state = next;
                    ll = new_ll;
                    if change < opts.tolerance {
                        converged = true;
                        break;
                    }
                }
            }
        }
        // Fixed effects at the final covariance.
        state.gamma = self.gls(&mats, &state.sigma)?;
        ll = self.loglik_with(&mats, &state)?;
        trace.push(ll);
        Ok(MixedFit {
            state,
            log_likelihood: ll,
            iterations,
            converged,
            psd_projected,
            trace,
        })
    }
}

pub(crate) fn centre_obs(panel: &super::Panel) -> Vec<CentreObs> {
    (0..panel.centres.len())
        .map(|i| {
            let hist = panel.history(i);
            CentreObs {
                idx: hist.iter().map(|h| h.0).collect(),
                y: DVector::from_iterator(hist.len(), hist.iter().map(|h| h.1)),
                s2: DVector::from_iterator(hist.len(), hist.iter().map(|h| h.2)),
            }
        })
        .collect()
}
