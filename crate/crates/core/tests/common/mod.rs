#![allow(dead_code)]

use ebmon::longitudinal::{assemble_panel, Panel};
use ebmon::CrudeEffect;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Crude effects from `N(mu, tau2)` true effects and `s2 ~ U(lo, hi)`.
pub fn crudes(rng: &mut ChaCha8Rng, n: usize, mu: f64, tau2: f64, s2: (f64, f64)) -> Vec<CrudeEffect> {
    (0..n)
        .map(|i| {
            let s = rng.random_range(s2.0..s2.1);
            let theta = mu + tau2.sqrt() * normal(rng);
            CrudeEffect {
                centre_id: format!("c{i:03}"),
                year: 2000,
                theta_hat: theta + s.sqrt() * normal(rng),
                s2: s,
            }
        })
        .collect()
}

/// Random symmetric positive-definite matrix with unit-scale eigenvalues.
pub fn spd(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| normal(rng));
    &a * a.transpose() / d as f64 + DMatrix::identity(d, d) * 0.1
}

pub fn mvn(rng: &mut ChaCha8Rng, mean: &[f64], cov: &DMatrix<f64>) -> Vec<f64> {
    let l = cov.clone().cholesky().expect("positive definite").l();
    let z = DVector::from_fn(mean.len(), |_, _| normal(rng));
    let e = l * z;
    mean.iter().zip(e.iter()).map(|(m, e)| m + e).collect()
}

/// Panel drawn from `MVN(mean, cov)` true effects with `s2 ~ U(lo, hi)` and
/// each cell missing with probability `missing` (every centre keeps at
/// least one year).
pub fn panel(
    rng: &mut ChaCha8Rng,
    n: usize,
    years: &[i32],
    mean: &[f64],
    cov: &DMatrix<f64>,
    s2: (f64, f64),
    missing: f64,
) -> Panel {
    let mut out = Vec::new();
    for i in 0..n {
        let theta = mvn(rng, mean, cov);
        let keep: Vec<bool> = (0..years.len()).map(|_| rng.random::<f64>() >= missing).collect();
        let forced = rng.random_range(0..years.len());
        for (j, &y) in years.iter().enumerate() {
            let s = rng.random_range(s2.0..s2.1);
            let z = normal(rng);
            if keep[j] || j == forced {
                out.push(CrudeEffect {
                    centre_id: format!("c{i:03}"),
                    year: y,
                    theta_hat: theta[j] + s.sqrt() * z,
                    s2: s,
                });
            }
        }
    }
    assemble_panel(&out).expect("valid panel")
}

/// AR(1) covariance `tau2 rho^|j-k|`.
pub fn ar1(tau2: f64, rho: f64, j: usize) -> DMatrix<f64> {
    DMatrix::from_fn(j, j, |a, b| tau2 * rho.powi((a as i32 - b as i32).abs()))
}

/// Means and covariance of the saturated very-preterm mortality model:
/// variances 0.13..0.35, correlations 0.47..0.99.
pub fn table3_like() -> (Vec<f64>, DMatrix<f64>) {
    let var = [0.13f64, 0.27, 0.35, 0.35, 0.30];
    let corr = [
        [1.0, 0.84, 0.80, 0.80, 0.47],
        [0.84, 1.0, 0.99, 0.99, 0.86],
        [0.80, 0.99, 1.0, 0.99, 0.88],
        [0.80, 0.99, 0.99, 1.0, 0.90],
        [0.47, 0.86, 0.88, 0.90, 1.0],
    ];
    let t = DMatrix::from_fn(5, 5, |a, b| (var[a] * var[b]).sqrt() * corr[a][b]);
    (vec![0.15, 0.36, 0.40, 0.42, 0.37], t)
}

/// Spearman rank correlation.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let ra = ebmon::ranking::midranks(a);
    let rb = ebmon::ranking::midranks(b);
    pearson(&ra, &rb)
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

pub fn quantile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let pos = q * (values.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    values[lo] + (pos - lo as f64) * (values[hi] - values[lo])
}

pub mod regimes {
    use ebmon::simulation::{PatientCount, ScenarioConfig, SimulationMode, TruePrior};

    /// Caesarean section, at-term infants: large centres, frequent outcome.
    pub fn caesarean_at_term(seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            seed,
            n_centres: 112,
            years: vec![1995],
            mode: SimulationMode::Patient,
            patients: PatientCount::Poisson { mean: 695.0 },
            baseline_rate: 0.16,
            beta: vec![0.5],
            information_scale: 1.0,
            prior: TruePrior::Univariate { mu: 0.038, tau2: 0.124 },
        }
    }

    /// Mortality, very preterm infants: about 14 patients per centre whose
    /// risk is dominated by case mix (gestational age and the like).
    pub fn mortality_very_preterm(seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            seed,
            n_centres: 112,
            years: vec![1993],
            mode: SimulationMode::Patient,
            patients: PatientCount::Poisson { mean: 14.0 },
            baseline_rate: 0.26,
            beta: vec![4.0, 3.0],
            information_scale: 1.0,
            prior: TruePrior::Univariate { mu: 0.23, tau2: 0.336 },
        }
    }
}

pub mod panels {
    use ebmon::simulation::{ScenarioConfig, TruePrior};

    /// Five years of the very-preterm mortality regime with true effects
    /// from the fitted autoregressive model (tau2 0.25, rho 0.945).
    pub fn very_preterm_years(seed: u64) -> ScenarioConfig {
        let t = super::ar1(0.25, 0.945, 5);
        let cov = (0..5).map(|a| (0..5).map(|b| t[(a, b)]).collect()).collect();
        ScenarioConfig {
            years: vec![1991, 1992, 1993, 1994, 1995],
            prior: TruePrior::Longitudinal { mean: vec![0.27, 0.33, 0.34, 0.36, 0.37], cov },
            ..super::regimes::mortality_very_preterm(seed)
        }
    }
}
