mod common;

use std::collections::BTreeMap;

use ebmon::longitudinal::{
    extrapolate, fit, fit_structured_with, fit_unstructured, predict_next, predict_panel, predictive_ranking,
    ExtrapolationPolicy, LongitudinalModel, Panel, Structure, StructuredOptions,
};
use ebmon::simulation::mvn_condition_oracle;
use ebmon::univariate::{fit_prior_mle, posteriors};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

const YEARS: [i32; 5] = [91, 92, 93, 94, 95];
const STRUCTURES: [Structure; 4] = [
    Structure::Unstructured,
    Structure::CompoundSymmetry,
    Structure::Ar1,
    Structure::RandomCoefficients,
];

fn min_eigenvalue(t: &DMatrix<f64>) -> f64 {
    t.clone().symmetric_eigen().eigenvalues.min()
}

fn random_panel(seed: u64, missing: f64) -> Panel {
    let mut rng = common::rng(seed);
    let n = rng.random_range(25..60);
    let cov = common::spd(&mut rng, 5) * 0.3;
    let mean: Vec<f64> = (0..5).map(|_| 0.3 * common::normal(&mut rng)).collect();
    common::panel(&mut rng, n, &YEARS, &mean, &cov, (0.05, 0.6), missing)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn fits_are_monotone_psd_and_nested(seed in any::<u64>()) {
        let panel = random_panel(seed, 0.2);
        let full = fit_unstructured(&panel).unwrap();
        for s in STRUCTURES {
            let m = fit(&panel, s).unwrap();
            for w in m.trace.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-10, "{s}: {} -> {}", w[0], w[1]);
            }
            let t = m.t_matrix();
            prop_assert!((&t - t.transpose()).amax() == 0.0);
            prop_assert!(min_eigenvalue(&t) >= -1e-10);
            prop_assert!(full.log_likelihood >= m.log_likelihood - 1e-6, "{s}: {} > {}", m.log_likelihood, full.log_likelihood);
        }
    }

    #[test]
    fn prediction_matches_conditioning_oracle(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let mut params = BTreeMap::new();
        params.insert("tau2".to_string(), rng.random_range(0.05..0.5));
        params.insert("rho".to_string(), rng.random_range(-0.9..0.95));
        let mean: Vec<f64> = (0..5).map(|_| common::normal(&mut rng)).collect();
        let model = LongitudinalModel::from_params(Structure::Ar1, YEARS.to_vec(), Some(mean), params, None, 0.0).unwrap();
        let ext = extrapolate(&model, ExtrapolationPolicy::LinearTrend).unwrap();
        let observed: Vec<usize> = (0..5).filter(|_| rng.random::<f64>() < 0.6).collect();
        let hist: Vec<(i32, f64, f64)> = observed
            .iter()
            .map(|&k| (YEARS[k], common::normal(&mut rng), rng.random_range(0.05..1.0)))
            .collect();
        let pred = predict_next(&ext, "c", &hist).unwrap();
        // Joint law of (theta_hat observed years, theta next year).
        let mut idx: Vec<usize> = observed.clone();
        idx.push(5);
        let joint = DMatrix::from_fn(idx.len(), idx.len(), |a, b| {
            ext.cov[(idx[a], idx[b])] + if a == b && a < observed.len() { hist[a].2 } else { 0.0 }
        });
        let m: Vec<f64> = idx.iter().map(|&k| ext.mean[k]).collect();
        let given: Vec<usize> = (0..observed.len()).collect();
        let values: Vec<f64> = hist.iter().map(|h| h.1).collect();
        let (cm, cv) = mvn_condition_oracle(&m, &joint, &given, &values).unwrap();
        prop_assert!((pred.mean - cm[0]).abs() < 1e-8);
        prop_assert!((pred.variance - cv[(0, 0)]).abs() < 1e-8);
        prop_assert!(pred.variance <= ext.tau2_next() + 1e-12);
    }

    #[test]
    fn more_history_never_increases_variance(seed in any::<u64>(), rho in -0.9f64..0.99) {
        let mut rng = common::rng(seed);
        let mut params = BTreeMap::new();
        params.insert("tau2".to_string(), 0.3);
        params.insert("rho".to_string(), rho);
        let model = LongitudinalModel::from_params(Structure::Ar1, YEARS.to_vec(), Some(vec![0.0; 5]), params, None, 0.0).unwrap();
        let ext = extrapolate(&model, ExtrapolationPolicy::CarryLast).unwrap();
        let full: Vec<(i32, f64, f64)> = YEARS.iter().map(|&y| (y, common::normal(&mut rng), rng.random_range(0.05..1.5))).collect();
        let mut prev = ext.tau2_next();
        for k in 1..=5 {
            let v = predict_next(&ext, "c", &full[5 - k..]).unwrap().variance;
            prop_assert!(v <= prev + 1e-12);
            prev = v;
        }
        if rho.abs() > 1e-3 {
            prop_assert!(prev < ext.tau2_next());
        }
    }
}

#[test]
fn single_year_reduces_to_univariate_prior() {
    let mut rng = common::rng(4);
    let c = common::crudes(&mut rng, 40, 0.2, 0.3, (0.05, 0.5));
    let panel = Panel::new(
        c.iter().map(|x| x.centre_id.clone()).collect(),
        vec![2000],
        c.iter().map(|x| x.theta_hat).collect(),
        c.iter().map(|x| x.s2).collect(),
        vec![true; c.len()],
    )
    .unwrap();
    let prior = fit_prior_mle(&c).unwrap();
    for s in STRUCTURES {
        let m = fit(&panel, s).unwrap();
        assert_eq!(m.mean[0], prior.mu, "{s}");
        assert_eq!(m.cov[0][0], prior.tau2, "{s}");
        assert_eq!(m.log_likelihood, prior.log_likelihood, "{s}");
    }
    // ar1 prediction at rho = 1 is the univariate posterior.
    let mut params = BTreeMap::new();
    params.insert("tau2".to_string(), prior.tau2);
    params.insert("rho".to_string(), 1.0);
    let model = LongitudinalModel::from_params(Structure::Ar1, vec![2000], Some(vec![prior.mu]), params, None, 0.0).unwrap();
    let ext = extrapolate(&model, ExtrapolationPolicy::CarryLast).unwrap();
    for (x, post) in c.iter().zip(posteriors(&c, &prior)) {
        let p = predict_next(&ext, &x.centre_id, &[(2000, x.theta_hat, x.s2)]).unwrap();
        assert!((p.mean - post.ebe).abs() < 1e-12);
        assert!((p.variance - post.pv).abs() < 1e-12);
    }
}

#[test]
fn noiseless_panel_gives_sample_moments() {
    let mut rng = common::rng(8);
    let (mean, t) = common::table3_like();
    let n = 80;
    let rows: Vec<Vec<f64>> = (0..n).map(|_| common::mvn(&mut rng, &mean, &t)).collect();
    let panel = Panel::new(
        (0..n).map(|i| i.to_string()).collect(),
        YEARS.to_vec(),
        rows.concat(),
        vec![1e-12; n * 5],
        vec![true; n * 5],
    )
    .unwrap();
    let m = fit_unstructured(&panel).unwrap();
    let col_mean: Vec<f64> = (0..5).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n as f64).collect();
    for a in 0..5 {
        assert!((m.mean[a] - col_mean[a]).abs() < 1e-6);
        for b in 0..5 {
            let cov = rows.iter().map(|r| (r[a] - col_mean[a]) * (r[b] - col_mean[b])).sum::<f64>() / n as f64;
            assert!((m.cov[a][b] - cov).abs() < 1e-6, "T[{a}][{b}] = {} vs {cov}", m.cov[a][b]);
        }
    }
}

#[test]
fn ar1_parameters_recovered() {
    let mut rng = common::rng(21);
    let cov = common::ar1(0.25, 0.9, 5);
    let panel = common::panel(&mut rng, 2000, &YEARS, &[0.1, 0.2, 0.3, 0.4, 0.5], &cov, (0.005, 0.015), 0.0);
    let m = fit(&panel, Structure::Ar1).unwrap();
    let (tau2, rho) = (m.param("tau2").unwrap(), m.param("rho").unwrap());
    assert!((tau2 / 0.25 - 1.0).abs() < 0.05, "tau2 = {tau2}");
    assert!((rho / 0.9 - 1.0).abs() < 0.05, "rho = {rho}");
    assert!(!m.boundary_flag);
}

#[test]
fn random_intercept_equals_perfect_compound_symmetry() {
    let mut rng = common::rng(31);
    let n = 60;
    let s2_by_year: [f64; 5] = [0.2, 0.3, 0.25, 0.4, 0.35];
    let mut rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let a = 0.5 * common::normal(&mut rng);
            (0..5).map(|k| a + s2_by_year[k].sqrt() * common::normal(&mut rng)).collect()
        })
        .collect();
    // Shift columns so the year means lie exactly on a line: both mean
    // models then have the same estimate.
    for k in 0..5 {
        let m = rows.iter().map(|r| r[k]).sum::<f64>() / n as f64;
        let target = 0.1 + 0.05 * (k as f64 + 1.0);
        rows.iter_mut().for_each(|r| r[k] += target - m);
    }
    let panel = Panel::new(
        (0..n).map(|i| i.to_string()).collect(),
        YEARS.to_vec(),
        rows.concat(),
        (0..n).flat_map(|_| s2_by_year).collect(),
        vec![true; n * 5],
    )
    .unwrap();
    let rc = fit_structured_with(
        &panel,
        Structure::RandomCoefficients,
        &StructuredOptions { zero_slope_variance: true, ..Default::default() },
    )
    .unwrap();
    let cs = fit_structured_with(
        &panel,
        Structure::CompoundSymmetry,
        &StructuredOptions { fixed_rho: Some(1.0), ..Default::default() },
    )
    .unwrap();
    assert!((rc.log_likelihood - cs.log_likelihood).abs() < 1e-6);
    for a in 0..5 {
        assert!((rc.mean[a] - cs.mean[a]).abs() < 1e-6);
        for b in 0..5 {
            assert!((rc.cov[a][b] - cs.cov[a][b]).abs() < 1e-6);
        }
    }
}

fn table3_panel(rng: &mut rand_chacha::ChaCha8Rng, n: usize, s2: (f64, f64)) -> Panel {
    let (mean, t) = common::table3_like();
    common::panel(rng, n, &YEARS, &mean, &t, s2, 0.1)
}

fn very_preterm_panel(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> Panel {
    table3_panel(rng, n, (0.8, 1.6))
}

fn correlations(m: &LongitudinalModel) -> Vec<f64> {
    let mut out = Vec::new();
    for a in 0..5 {
        for b in (a + 1)..5 {
            out.push(m.cov[a][b] / (m.cov[a][a] * m.cov[b][b]).sqrt());
        }
    }
    out
}

#[test]
fn table3_correlations_recovered_within_simulation_band() {
    let (_, t) = common::table3_like();
    let truth: Vec<f64> = {
        let mut out = Vec::new();
        for a in 0..5 {
            for b in (a + 1)..5 {
                out.push(t[(a, b)] / (t[(a, a)] * t[(b, b)]).sqrt());
            }
        }
        out
    };
    let mut rng = common::rng(2718);
    // Large, precise panel: estimates close to the generating values.
    let big = fit_unstructured(&table3_panel(&mut rng, 2000, (0.02, 0.05))).unwrap();
    for (r, r0) in correlations(&big).iter().zip(&truth) {
        assert!((r - r0).abs() < 0.05, "{r} vs {r0}");
    }
    // 112 centres: each fitted correlation inside the 95% band of replicate fits.
    let estimate = correlations(&fit_unstructured(&very_preterm_panel(&mut rng, 112)).unwrap());
    let reps: Vec<Vec<f64>> = (0..60)
        .map(|_| correlations(&fit_unstructured(&very_preterm_panel(&mut rng, 112)).unwrap()))
        .collect();
    for (k, e) in estimate.iter().enumerate() {
        let mut v: Vec<f64> = reps.iter().map(|r| r[k]).filter(|x| x.is_finite()).collect();
        let lo = common::quantile(&mut v, 0.025);
        let hi = common::quantile(&mut v, 0.975);
        assert!(lo <= *e && *e <= hi, "pair {k}: {e} outside [{lo}, {hi}]");
        assert!(lo <= truth[k] && truth[k] <= hi, "pair {k}: truth {} outside [{lo}, {hi}]", truth[k]);
    }
}

#[test]
fn structured_models_rank_alike() {
    let mut rng = common::rng(99);
    for _ in 0..3 {
        let panel = very_preterm_panel(&mut rng, 112);
        let epcs: Vec<Vec<f64>> = [Structure::Ar1, Structure::RandomCoefficients, Structure::CompoundSymmetry]
            .into_iter()
            .map(|s| {
                let m = fit(&panel, s).unwrap();
                let ext = extrapolate(&m, ExtrapolationPolicy::CarryLast).unwrap();
                let pred = predict_panel(&ext, &panel).unwrap();
                let (rows, _) = predictive_ranking(&pred, ext.mu_next(), ext.tau2_next());
                rows.into_iter().map(|r| r.epc).collect()
            })
            .collect();
        let r = common::spearman(&epcs[0], &epcs[1]);
        assert!(r > 0.9, "ar1 vs rc rank correlation {r}");
    }
}

#[test]
fn empty_histories_have_no_predictive_rankability() {
    let mut params = BTreeMap::new();
    params.insert("tau2".to_string(), 0.25);
    params.insert("rho".to_string(), 0.945);
    let model = LongitudinalModel::from_params(Structure::Ar1, YEARS.to_vec(), Some(vec![0.3; 5]), params, None, 0.0).unwrap();
    let ext = extrapolate(&model, ExtrapolationPolicy::CarryLast).unwrap();
    let preds: Vec<_> = (0..10).map(|i| predict_next(&ext, &i.to_string(), &[]).unwrap()).collect();
    let (rows, ra) = predictive_ranking(&preds, ext.mu_next(), ext.tau2_next());
    assert_eq!(ra.ra, 0.0);
    assert!(rows.iter().all(|r| r.epc == 50.0));
}

