//! Empirical Bayes monitoring of institutional performance.
//!
//! The pipeline runs in two stages. Patient-level binary outcomes are first
//! reduced to per-centre observed/expected counts under a logistic model
//! fitted without centre terms, giving a crude log-odds effect and its
//! likelihood variance for every centre-year ([`stage1`]). The crude effects
//! are then treated as noisy measurements of normally distributed true
//! effects: a single year is analysed with [`univariate`] and [`ranking`],
//! and a panel of years with [`longitudinal`], which also predicts next
//! year's effect for every centre.
//!
//! [`simulation`] generates synthetic data from known parameters and hosts the
//! Monte-Carlo and conditioning oracles used by the test suites. [`cli`]
//! drives the whole pipeline from CSV files.

pub mod cli;
pub mod error;
pub mod io;
pub mod linalg;
pub mod longitudinal;
pub mod ranking;
pub mod simulation;
pub mod stage1;
pub mod stats;
pub mod univariate;

pub use error::{Error, Result};
pub use longitudinal::{
    ExtrapolationPolicy, Extrapolation, LongitudinalModel, Panel, PredictiveDistribution,
    Structure,
};
pub use ranking::{RankabilityReport, RankingRow};
pub use stage1::{BetaModel, CentreYearSummary, CrudeEffect, PatientRecord};
pub use univariate::{CovariatePrior, PosteriorSummary, PriorEstimate, PriorMethod};
