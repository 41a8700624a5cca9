use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stage1::CrudeEffect;

/// Centre x year table of crude effects with a shared missingness mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub centres: Vec<String>,
    pub years: Vec<i32>,
    /// Row-major `centres.len() x years.len()`; NaN where unobserved.
    pub theta_hat: Vec<f64>,
    /// Row-major, NaN where unobserved.
    pub s2: Vec<f64>,
    pub observed: Vec<bool>,
}

impl Panel {
    /// Builds a panel from dense row-major tables. Centres without any
    /// observed year are dropped (and logged).
    pub fn new(
        centres: Vec<String>,
        years: Vec<i32>,
        theta_hat: Vec<f64>,
        s2: Vec<f64>,
        observed: Vec<bool>,
    ) -> Result<Panel> {
        let (n, j) = (centres.len(), years.len());
        if theta_hat.len() != n * j || s2.len() != n * j || observed.len() != n * j {
            return Err(Error::invalid(format!(
                "panel tables must have {n} x {j} = {} entries",
                n * j
            )));
        }
        if years.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("panel years must be strictly increasing"));
        }
        let mut panel = Panel {
            centres: Vec::with_capacity(n),
            years,
            theta_hat: Vec::with_capacity(n * j),
            s2: Vec::with_capacity(n * j),
            observed: Vec::with_capacity(n * j),
        };
        for (i, id) in centres.into_iter().enumerate() {
            let row = i * j..(i + 1) * j;
            let mask = &observed[row.clone()];
            if !mask.iter().any(|&m| m) {
                log::warn!("dropping centre {id}: no observed years");
                continue;
            }
            for k in row {
                if observed[k] {
                    if !theta_hat[k].is_finite() || !(s2[k] > 0.0) || !s2[k].is_finite() {
                        return Err(Error::invalid(format!(
                            "centre {id}: invalid observation (theta_hat={}, s2={})",
                            theta_hat[k], s2[k]
                        )));
                    }
                    panel.theta_hat.push(theta_hat[k]);
                    panel.s2.push(s2[k]);
                } else {
                    panel.theta_hat.push(f64::NAN);
                    panel.s2.push(f64::NAN);
                }
                panel.observed.push(observed[k]);
            }
            panel.centres.push(id);
        }
        Ok(panel)
    }

    pub fn n_centres(&self) -> usize {
        self.centres.len()
    }

    pub fn n_years(&self) -> usize {
        self.years.len()
    }

    pub fn get(&self, centre: usize, year: usize) -> Option<(f64, f64)> {
        let k = centre * self.years.len() + year;
        self.observed[k].then(|| (self.theta_hat[k], self.s2[k]))
    }

    /// Observed `(year index, theta_hat, s2)` triples of one centre.
    pub fn history(&self, centre: usize) -> Vec<(usize, f64, f64)> {
        (0..self.years.len())
            .filter_map(|j| self.get(centre, j).map(|(t, s)| (j, t, s)))
            .collect()
    }

    /// Crude effects of a single year (observed centres only).
    pub fn year_slice(&self, year: usize) -> Vec<CrudeEffect> {
        (0..self.n_centres())
            .filter_map(|i| {
                self.get(i, year).map(|(t, s)| CrudeEffect {
                    centre_id: self.centres[i].clone(),
                    year: self.years[year],
                    theta_hat: t,
                    s2: s,
                })
            })
            .collect()
    }

    /// Number of centres observing both years.
    pub fn joint_count(&self, a: usize, b: usize) -> usize {
        (0..self.n_centres())
            .filter(|&i| self.get(i, a).is_some() && self.get(i, b).is_some())
            .count()
    }
}

/// Lays crude effects out as a centre x year panel.
pub fn assemble_panel(crudes: &[CrudeEffect]) -> Result<Panel> {
    let mut cells: BTreeMap<(&str, i32), &CrudeEffect> = BTreeMap::new();
    for c in crudes {
        if cells.insert((c.centre_id.as_str(), c.year), c).is_some() {
            return Err(Error::Duplicate {
                centre: c.centre_id.clone(),
                year: c.year,
            });
        }
    }
    let years: Vec<i32> = crudes.iter().map(|c| c.year).collect::<BTreeSet<_>>().into_iter().collect();
    if years.len() < 2 {
        return Err(Error::invalid(format!(
            "a panel needs at least 2 years, found {}",
            years.len()
        )));
    }
    let centres: Vec<String> = crudes
        .iter()
        .map(|c| c.centre_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let j = years.len();
    let mut theta = vec![f64::NAN; centres.len() * j];
    let mut s2 = vec![f64::NAN; centres.len() * j];
    let mut observed = vec![false; centres.len() * j];
    for (i, id) in centres.iter().enumerate() {
        for (k, y) in years.iter().enumerate() {
            if let Some(c) = cells.get(&(id.as_str(), *y)) {
                theta[i * j + k] = c.theta_hat;
                s2[i * j + k] = c.s2;
                observed[i * j + k] = true;
            }
        }
    }
    Panel::new(centres, years, theta, s2, observed)
}
