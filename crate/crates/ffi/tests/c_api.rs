use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use ebmon_ffi::*;

fn last_error() -> String {
    let p = ebmon_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn crude_effect_arithmetic() {
    let (mut t, mut s) = (0.0, 0.0);
    let st = unsafe { ebmon_crude_effect(12.0, 10.0, 8.0, &mut t, &mut s) };
    assert_eq!(st, EbmonStatus::Ok);
    assert_eq!((t, s), (0.25, 0.125));
    let st = unsafe { ebmon_crude_effect(12.0, 10.0, 0.0, &mut t, &mut s) };
    assert_eq!(st, EbmonStatus::InvalidInput);
    assert!(last_error().contains("information"));
    let st = unsafe { ebmon_crude_effect(1.0, 1.0, 1.0, ptr::null_mut(), &mut s) };
    assert_eq!(st, EbmonStatus::NullPointer);
}

#[test]
fn prior_fit_matches_library() {
    let theta = [-0.4, 0.1, 0.3, 0.9, 0.2];
    let s2 = [0.2, 0.1, 0.3, 0.2, 0.05];
    let mut prior = ptr::null_mut();
    let st = unsafe { ebmon_prior_fit(theta.as_ptr(), s2.as_ptr(), 5, EbmonEstimator::Mle, &mut prior) };
    assert_eq!(st, EbmonStatus::Ok);
    let (mut mu, mut tau2, mut rho) = (0.0, 0.0, 0.0);
    unsafe { ebmon_prior_summary(prior, &mut mu, &mut tau2, ptr::null_mut(), &mut rho) };

    let crudes: Vec<ebmon::CrudeEffect> = (0..5)
        .map(|i| ebmon::CrudeEffect { centre_id: i.to_string(), year: 0, theta_hat: theta[i], s2: s2[i] })
        .collect();
    let direct = ebmon::univariate::fit_prior_mle(&crudes).unwrap();
    assert_eq!((mu, tau2), (direct.mu, direct.tau2));

    let (mut ebe, mut pv, mut w) = ([0.0; 5], [0.0; 5], [0.0; 5]);
    let st = unsafe { ebmon_prior_posteriors(prior, 5, ebe.as_mut_ptr(), pv.as_mut_ptr(), w.as_mut_ptr()) };
    assert_eq!(st, EbmonStatus::Ok);
    for i in 0..5 {
        assert!((w[i] * s2[i] - pv[i]).abs() < 1e-15);
    }
    let (mut er, mut pcer, mut epc, mut ra) = ([0.0; 5], [0.0; 5], [0.0; 5], 0.0);
    let st = unsafe { ebmon_prior_ranking(prior, 5, er.as_mut_ptr(), pcer.as_mut_ptr(), epc.as_mut_ptr(), &mut ra) };
    assert_eq!(st, EbmonStatus::Ok);
    assert!((er.iter().sum::<f64>() - 15.0).abs() < 1e-9);
    assert!((0.0..=1.0).contains(&ra));

    let st = unsafe { ebmon_prior_posteriors(prior, 4, ebe.as_mut_ptr(), pv.as_mut_ptr(), w.as_mut_ptr()) };
    assert_eq!(st, EbmonStatus::InvalidInput);
    unsafe { ebmon_prior_free(prior) };
}

#[test]
fn too_few_centres_is_invalid_input() {
    let mut prior = ptr::null_mut();
    let st = unsafe { ebmon_prior_fit([0.1].as_ptr(), [0.2].as_ptr(), 1, EbmonEstimator::Moment, &mut prior) };
    assert_eq!(st, EbmonStatus::InvalidInput);
    assert!(prior.is_null());
    assert!(last_error().contains("at least 2"));
}

#[test]
fn random_coefficients_from_parameters() {
    let years = [91, 92, 93, 94, 95];
    let names: Vec<CString> = ["alpha", "beta", "tau2_a", "tau2_b", "rho_ab"]
        .iter()
        .map(|s| CString::new(*s).unwrap())
        .collect();
    let name_ptrs: Vec<_> = names.iter().map(|c| c.as_ptr()).collect();
    let values = [0.18, 0.053, 0.19, 0.0125, -0.23];
    let mut model = ptr::null_mut();
    let st = unsafe {
        ebmon_model_from_params(
            EbmonStructure::RandomCoefficients,
            years.as_ptr(),
            5,
            ptr::null(),
            name_ptrs.as_ptr(),
            values.as_ptr(),
            5,
            90,
            true,
            -408.51,
            &mut model,
        )
    };
    assert_eq!(st, EbmonStatus::Ok);
    let (mut aic, mut k) = (0.0, 0usize);
    unsafe { ebmon_model_fit_stats(model, ptr::null_mut(), &mut aic, ptr::null_mut(), &mut k) };
    assert_eq!(k, 5);
    assert!((aic + 413.51).abs() < 1e-9);

    let policy = CString::new("trend").unwrap();
    let (mut mu, mut tau2) = (0.0, 0.0);
    let st = unsafe { ebmon_model_extrapolate(model, policy.as_ptr(), &mut mu, &mut tau2) };
    assert_eq!(st, EbmonStatus::Ok);
    assert!((mu - 0.498).abs() < 1e-12);
    assert!((tau2 - 0.5055).abs() < 1e-4);

    let theta = [0.3, f64::NAN, 0.5, 0.6, 0.4];
    let s2 = [0.4, f64::NAN, 0.5, 0.3, 0.6];
    let (mut m, mut v) = (0.0, 0.0);
    let st = unsafe { ebmon_model_predict(model, policy.as_ptr(), theta.as_ptr(), s2.as_ptr(), 5, &mut m, &mut v) };
    assert_eq!(st, EbmonStatus::Ok);
    assert!(v > 0.0 && v < tau2);

    let mut beta = 0.0;
    let key = CString::new("beta").unwrap();
    unsafe { ebmon_model_param(model, key.as_ptr(), &mut beta) };
    assert_eq!(beta, 0.053);
    let bad = CString::new("manual").unwrap();
    let st = unsafe { ebmon_model_extrapolate(model, bad.as_ptr(), &mut mu, &mut tau2) };
    assert_eq!(st, EbmonStatus::InvalidInput);
    unsafe { ebmon_model_free(model) };
}

#[test]
fn panel_fit_round_trip() {
    // 6 centres x 3 years, one gap.
    let theta = [
        0.1, 0.2, 0.15, -0.3, -0.2, -0.25, 0.5, 0.6, f64::NAN, 0.0, 0.05, 0.1, -0.1, -0.05, 0.0, 0.3, 0.2, 0.35,
    ];
    let s2: Vec<f64> = theta.iter().map(|t: &f64| if t.is_nan() { f64::NAN } else { 0.05 }).collect();
    let years = [2001, 2002, 2003];
    let mut model = ptr::null_mut();
    let st = unsafe {
        ebmon_panel_fit(theta.as_ptr(), s2.as_ptr(), years.as_ptr(), 6, 3, EbmonStructure::Ar1, &mut model)
    };
    assert_eq!(st, EbmonStatus::Ok, "{}", last_error());
    let (mut mean, mut cov) = ([0.0; 3], [0.0; 9]);
    let st = unsafe { ebmon_model_moments(model, 3, mean.as_mut_ptr(), cov.as_mut_ptr()) };
    assert_eq!(st, EbmonStatus::Ok);
    assert_eq!(cov[1], cov[3]);
    assert!(cov[0] >= 0.0);
    unsafe { ebmon_model_free(model) };
}

#[test]
fn header_compiles_as_c() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/ebmon.h")).unwrap();
    for f in ["ebmon_prior_fit", "ebmon_model_predict", "ebmon_last_error", "typedef struct EbmonPrior EbmonPrior"] {
        assert!(header.contains(f), "header lacks {f}");
    }
    let Ok(status) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(dir.join("tests/smoke.c"))
        .status()
    else {
        eprintln!("no C compiler found; syntax check skipped");
        return;
    };
    assert!(status.success());
}
