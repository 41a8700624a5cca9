//! Normal and chi-square helpers shared across the crate.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn norm_cdf(x: f64) -> f64 {
    if x.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn norm_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Two-sided critical value `z_{(1+level)/2}`; zero for `level == 0`.
pub fn two_sided_z(level: f64) -> f64 {
    if level <= 0.0 {
        0.0
    } else {
        norm_quantile(0.5 * (1.0 + level))
    }
}

pub fn chi2_quantile(p: f64, df: f64) -> f64 {
    ChiSquared::new(df)
        .expect("positive degrees of freedom")
        .inverse_cdf(p)
}

/// log N(x; mean, var)
pub fn norm_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// log(1 + e^x) without overflow.
pub fn log1pexp(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Median with the even-count convention of averaging the two central values.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Population (divide by n) variance.
pub fn population_variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}
