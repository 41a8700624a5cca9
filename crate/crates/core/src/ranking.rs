//! Expected ranks, percentiles and rankability from normal posterior (or
//! predictive) summaries.

use serde::{Deserialize, Serialize};

use crate::stats::{norm_cdf, population_variance};
use crate::univariate::PosteriorSummary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub centre_id: String,
    /// Midrank percentile of the crude estimate.
    pub crude_pct: f64,
    /// Midrank percentile of the posterior mean.
    pub ebe_pct: f64,
    pub er: f64,
    pub pcer: f64,
    pub epc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceConvention {
    /// Divide by n.
    Population,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankabilityReport {
    pub ra: f64,
    pub n: usize,
    pub variance_convention: VarianceConvention,
}

/// `ER_i = 1 + sum_{j != i} P(theta_j < theta_i | data)` under independent
/// normal posteriors.
///
/// A pair with zero combined posterior variance contributes the indicator
/// of `EBE_i > EBE_j`, or 1/2 when the means tie.
pub fn expected_rank(posteriors: &[PosteriorSummary]) -> Vec<f64> {
    let n = posteriors.len();
    let mut er = vec![1.0; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (&posteriors[i], &posteriors[j]);
            let sd = (a.pv + b.pv).sqrt();
            let diff = a.ebe - b.ebe;
            let p = if sd > 0.0 {
                norm_cdf(diff / sd)
            } else if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                0.0
            } else {
                log::debug!("degenerate tie between {} and {}", a.centre_id, b.centre_id);
                0.5
            };
            er[i] += p;
            er[j] += 1.0 - p;
        }
    }
    er
}

/// `100 (ER - 0.5) / n`.
pub fn pcer(er: &[f64], n: usize) -> Vec<f64> {
    er.iter().map(|r| 100.0 * (r - 0.5) / n as f64).collect()
}

/// `100 Phi((EBE - mu) / sqrt(tau^2 + pv))`; 50 when the denominator is 0.
pub fn epc(post: &PosteriorSummary, mu: f64, tau2: f64) -> f64 {
    let var = tau2 + post.pv;
    if var <= 0.0 {
        log::debug!("centre {}: zero prior and posterior variance, EPC = 50", post.centre_id);
        return 50.0;
    }
    100.0 * norm_cdf((post.ebe - mu) / var.sqrt())
}

/// `12 var(EPC) / 100^2` with the population variance.
pub fn rankability(epc: &[f64]) -> RankabilityReport {
    RankabilityReport {
        ra: 12.0 * population_variance(epc) / 1e4,
        n: epc.len(),
        variance_convention: VarianceConvention::Population,
    }
}

/// Ranks `1..=n` with ties sharing their average rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Ranks start+1 ..= end share their mean.
        let mid = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = mid;
        }
        start = end;
    }
    ranks
}

/// Midrank percentiles `100 (rank - 0.5) / n`.
pub fn crude_percentile(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    midranks(values).iter().map(|r| 100.0 * (r - 0.5) / n).collect()
}

/// Full ranking table in input order.
///
/// `crude` carries the values behind `crude_pct` (the crude estimates for a
/// single-year analysis).
pub fn rank_table(
    crude: &[f64],
    posteriors: &[PosteriorSummary],
    mu: f64,
    tau2: f64,
) -> (Vec<RankingRow>, RankabilityReport) {
    assert_eq!(crude.len(), posteriors.len(), "one crude value per posterior");
    let n = posteriors.len();
    let er = expected_rank(posteriors);
    let pc = pcer(&er, n);
    let crude_pct = crude_percentile(crude);
    let ebes: Vec<f64> = posteriors.iter().map(|p| p.ebe).collect();
    let ebe_pct = crude_percentile(&ebes);
    let epcs: Vec<f64> = posteriors.iter().map(|p| epc(p, mu, tau2)).collect();
    let rows = (0..n)
        .map(|i| RankingRow {
            centre_id: posteriors[i].centre_id.clone(),
            crude_pct: crude_pct[i],
            ebe_pct: ebe_pct[i],
            er: er[i],
            pcer: pc[i],
            epc: epcs[i],
        })
        .collect();
    (rows, rankability(&epcs))
}
