//! Command-line front end.
//!
//! Input rows are grouped into strata by the `--stratify-by` columns and
//! every stratum is processed independently (in parallel). Single-year
//! analyses split each stratum further by year. Each stratum writes its own
//! file set and a `<label>.log` with the warnings raised while processing it.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, fmt_g, CsvOut};
use crate::longitudinal::{
    self, assemble_panel, extrapolate, model_fit_stats, predict_panel, predictive_ranking, ExtrapolationPolicy,
    FitStats, LongitudinalModel, Panel, PredictiveDistribution, Structure,
};
use crate::ranking::{self, RankingRow};
use crate::simulation::{self, ScenarioConfig};
use crate::stage1::{self, CentreYearSummary, CrudeEffect, PatientRecord};
use crate::stats::two_sided_z;
use crate::univariate::{self, PriorMethod};

#[derive(Debug, Parser)]
#[command(name = "ebmon", version, about = "Empirical Bayes monitoring of centre performance")]
pub struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Crude centre effects from patient or summary data.
    Score(ScoreArgs),
    /// Single-year shrinkage, ranking and rankability.
    Rank(RankArgs),
    /// Multi-year models and next-year predictions.
    Longitudinal(LongitudinalArgs),
    /// Synthetic data from a scenario file.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputMode {
    Patient,
    Summary,
    Crude,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Estimator {
    Mle,
    Moment,
}

impl From<Estimator> for PriorMethod {
    fn from(e: Estimator) -> Self {
        match e {
            Estimator::Mle => PriorMethod::MleEm,
            Estimator::Moment => PriorMethod::Moment,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "patient")]
    pub mode: InputMode,
    /// Columns defining the strata (comma separated or repeated).
    #[arg(long, value_delimiter = ',')]
    pub stratify_by: Vec<String>,
    /// Centre-years with less Bernoulli information are excluded.
    #[arg(long, default_value_t = stage1::DEFAULT_MIN_INFORMATION)]
    pub min_information: f64,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Omit the `# generated ...` first line of every output file.
    #[arg(long)]
    pub no_timestamp: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long, value_enum, default_value = "mle")]
    pub estimator: Estimator,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
}

#[derive(Debug, Clone, Args)]
pub struct LongitudinalArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "crude")]
    pub mode: InputMode,
    #[arg(long, value_delimiter = ',')]
    pub stratify_by: Vec<String>,
    #[arg(long, default_value_t = stage1::DEFAULT_MIN_INFORMATION)]
    pub min_information: f64,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Covariance structures to fit (repeatable): unstructured, cs, ar1, rc.
    #[arg(long = "structure", value_delimiter = ',', default_values_t = [Structure::Ar1, Structure::RandomCoefficients])]
    pub structures: Vec<Structure>,
    /// Mean extrapolation: manual=<v>, carry or trend.
    #[arg(long, default_value = "carry")]
    pub extrapolate: ExtrapolationPolicy,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Model parameters to use instead of fitting (TOML).
    #[arg(long)]
    pub fixture: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        3
    } else {
        2
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Score(a) => cmd_score(&a),
        Command::Rank(a) => cmd_rank(&a),
        Command::Longitudinal(a) => cmd_longitudinal(&a),
        Command::Simulate(a) => cmd_simulate(&a),
    }
}

/// Messages collected while processing one stratum.
#[derive(Default)]
struct StratumLog {
    lines: Vec<String>,
}

impl StratumLog {
    fn note(&mut self, label: &str, msg: impl Into<String>) {
        let msg = msg.into();
        log::info!("[{label}] {msg}");
        self.lines.push(msg);
    }

    fn write(&self, out: &OutputArgs, label: &str) -> Result<()> {
        let mut text = String::new();
        if !out.no_timestamp {
            text.push_str(&io::timestamp_line());
            text.push('\n');
        }
        for l in &self.lines {
            text.push_str(l);
            text.push('\n');
        }
        std::fs::write(out.out.join(format!("{label}.log")), text)?;
        Ok(())
    }
}

struct Stratum {
    key: Vec<String>,
    summaries: Vec<CentreYearSummary>,
    crudes: Vec<CrudeEffect>,
    log: StratumLog,
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '-' })
        .collect()
}

fn label(key: &[String]) -> String {
    if key.is_empty() {
        "all".into()
    } else {
        key.iter().map(|k| sanitize(k)).collect::<Vec<_>>().join("_")
    }
}

fn group<T>(rows: Vec<io::Tagged<T>>) -> BTreeMap<Vec<String>, Vec<T>> {
    let mut m: BTreeMap<Vec<String>, Vec<T>> = BTreeMap::new();
    for r in rows {
        m.entry(r.stratum).or_default().push(r.item);
    }
    m
}

fn crudes_from_summaries(summaries: &[CentreYearSummary], min_info: f64, lbl: &str, log: &mut StratumLog) -> Vec<CrudeEffect> {
    let (kept, excluded) = stage1::crude_effects(summaries, min_info);
    for e in excluded {
        log.note(lbl, format!("excluded centre {} year {}: {}", e.centre_id, e.year, e.reason));
    }
    kept
}

fn score_patients(key: Vec<String>, patients: Vec<PatientRecord>, min_info: f64) -> Result<Stratum> {
    let lbl = label(&key);
    let mut log = StratumLog::default();
    let mut by_year: BTreeMap<i32, Vec<PatientRecord>> = BTreeMap::new();
    for p in patients {
        by_year.entry(p.year).or_default().push(p);
    }
    let mut summaries = Vec::new();
    for (year, cohort) in &by_year {
        let beta = stage1::fit_logistic(cohort)?;
        log.note(
            &lbl,
            format!(
                "year {year}: {} patients, logistic fit in {} iterations, coefficients [{}]",
                cohort.len(),
                beta.iterations,
                beta.coefficients.iter().map(|b| fmt_g(*b)).collect::<Vec<_>>().join(", ")
            ),
        );
        summaries.extend(stage1::summarize(cohort, &beta)?);
    }
    let crudes = crudes_from_summaries(&summaries, min_info, &lbl, &mut log);
    Ok(Stratum { key, summaries, crudes, log })
}

fn load_strata(input: &Path, mode: InputMode, stratify_by: &[String], min_info: f64) -> Result<Vec<Stratum>> {
    match mode {
        InputMode::Patient => {
            let groups = group(io::read_patients(input, stratify_by)?);
            groups
                .into_par_iter()
                .map(|(key, patients)| score_patients(key, patients, min_info))
                .collect()
        }
        InputMode::Summary => Ok(group(io::read_summaries(input, stratify_by)?)
            .into_iter()
            .map(|(key, summaries)| {
                let lbl = label(&key);
                let mut log = StratumLog::default();
                let crudes = crudes_from_summaries(&summaries, min_info, &lbl, &mut log);
                Stratum { key, summaries, crudes, log }
            })
            .collect()),
        InputMode::Crude => Ok(group(io::read_crudes(input, stratify_by)?)
            .into_iter()
            .map(|(key, crudes)| Stratum {
                key,
                summaries: Vec::new(),
                crudes,
                log: StratumLog::default(),
            })
            .collect()),
    }
}

fn prepare_out(out: &OutputArgs) -> Result<()> {
    std::fs::create_dir_all(&out.out)?;
    Ok(())
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("--level must be in (0, 1), got {level}")))
    }
}

/// Runs `work` on every item in parallel and returns the first error after
/// all items have finished.
fn run_all<T: Send, R: Send>(items: Vec<T>, work: impl Fn(T) -> Result<R> + Sync + Send) -> Result<Vec<R>> {
    let results: Vec<Result<R>> = items.into_par_iter().map(work).collect();
    let mut out = Vec::with_capacity(results.len());
    let mut first = None;
    for r in results {
        match r {
            Ok(v) => out.push(v),
            Err(e) => {
                log::error!("{e}");
                first.get_or_insert(e);
            }
        }
    }
    match first {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

pub fn cmd_score(args: &ScoreArgs) -> Result<()> {
    if args.input.mode == InputMode::Crude {
        return Err(Error::invalid("score needs --mode patient or summary"));
    }
    prepare_out(&args.output)?;
    let strata = load_strata(&args.input.input, args.input.mode, &args.input.stratify_by, args.input.min_information)?;
    let ts = !args.output.no_timestamp;
    run_all(strata, |s| {
        let lbl = label(&s.key);
        let dir = &args.output.out;
        io::write_crudes(&dir.join(format!("crude_{lbl}.csv")), &s.crudes, ts)?;
        if args.input.mode == InputMode::Patient {
            io::write_summaries(&dir.join(format!("summary_{lbl}.csv")), &s.summaries, ts)?;
        }
        s.log.write(&args.output, &lbl)?;
        println!("{lbl}: {} crude effects", s.crudes.len());
        Ok(())
    })?;
    Ok(())
}

/// Result of a single-year analysis.
#[derive(Debug, Clone, Serialize)]
pub struct RankReport {
    pub label: String,
    pub prior: univariate::PriorEstimate,
    pub rho: f64,
    pub ra: f64,
    pub n: usize,
}

impl RankReport {
    pub fn summary_line(&self) -> String {
        format!(
            "{}: n={} mu={} tau2={} rho={} RA={}",
            self.label,
            self.n,
            fmt_g(self.prior.mu),
            fmt_g(self.prior.tau2),
            fmt_g(self.rho),
            fmt_g(self.ra)
        )
    }
}

/// Shrinkage, ranking and plot data for one stratum-year.
pub fn rank_stratum(
    lbl: &str,
    crudes: &[CrudeEffect],
    method: PriorMethod,
    level: f64,
    out: &OutputArgs,
) -> Result<RankReport> {
    let ts = !out.no_timestamp;
    let dir = &out.out;
    let prior = univariate::fit_prior(crudes, method)?;
    let posts = univariate::posteriors(crudes, &prior);
    let rho = univariate::proportion_true_variation(&prior, crudes);
    let theta: Vec<f64> = crudes.iter().map(|c| c.theta_hat).collect();
    let (rows, ra) = ranking::rank_table(&theta, &posts, prior.mu, prior.tau2);

    let mut order: Vec<usize> = (0..crudes.len()).collect();
    order.sort_by(|&a, &b| posts[a].ebe.total_cmp(&posts[b].ebe).then_with(|| posts[a].centre_id.cmp(&posts[b].centre_id)));

    let mut post_csv = CsvOut::create(
        &dir.join(format!("posterior_{lbl}.csv")),
        &["centre_id", "theta_hat", "s2", "ebe", "pv", "shrinkage", "ci_lo", "ci_hi", "ppi_lo", "ppi_hi"],
        ts,
    )?;
    let mut ci = Vec::new();
    let mut ppi = Vec::new();
    for &i in &order {
        let (c, p) = (&crudes[i], &posts[i]);
        let (cl, ch) = stage1::confidence_interval(c, level);
        let (pl, ph) = univariate::posterior_interval(p, level);
        post_csv.row(&[
            c.centre_id.clone(),
            fmt_g(c.theta_hat),
            fmt_g(c.s2),
            fmt_g(p.ebe),
            fmt_g(p.pv),
            fmt_g(p.shrinkage),
            fmt_g(cl),
            fmt_g(ch),
            fmt_g(pl),
            fmt_g(ph),
        ])?;
        ci.push((c.centre_id.clone(), c.theta_hat, cl, ch));
        ppi.push((c.centre_id.clone(), p.ebe, pl, ph));
    }
    post_csv.finish()?;
    io::write_intervals(&dir.join(format!("ci_intervals_{lbl}.csv")), &ci, ts)?;
    io::write_intervals(&dir.join(format!("ppi_intervals_{lbl}.csv")), &ppi, ts)?;

    let sorted: Vec<&RankingRow> = order.iter().map(|&i| &rows[i]).collect();
    write_ranking(&dir.join(format!("ranking_{lbl}.csv")), &sorted, ts)?;
    let mut pct = CsvOut::create(
        &dir.join(format!("percentiles_{lbl}.csv")),
        &["centre_id", "crude_pct", "ebe_pct", "pcer", "epc"],
        ts,
    )?;
    for r in &sorted {
        pct.row(&[r.centre_id.clone(), fmt_g(r.crude_pct), fmt_g(r.ebe_pct), fmt_g(r.pcer), fmt_g(r.epc)])?;
    }
    pct.finish()?;
    let mut summary = CsvOut::create(&dir.join(format!("ranking_summary_{lbl}.csv")), &["ra", "n", "rho"], ts)?;
    summary.row(&[fmt_g(ra.ra), ra.n.to_string(), fmt_g(rho)])?;
    summary.finish()?;

    let report = RankReport {
        label: lbl.to_string(),
        prior,
        rho,
        ra: ra.ra,
        n: ra.n,
    };
    std::fs::write(dir.join(format!("prior_{lbl}.json")), serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(report)
}

fn write_ranking(path: &Path, rows: &[&RankingRow], ts: bool) -> Result<()> {
    let mut out = CsvOut::create(path, &["centre_id", "crude_pct", "ebe_pct", "er", "pcer", "epc"], ts)?;
    for r in rows {
        out.row(&[
            r.centre_id.clone(),
            fmt_g(r.crude_pct),
            fmt_g(r.ebe_pct),
            fmt_g(r.er),
            fmt_g(r.pcer),
            fmt_g(r.epc),
        ])?;
    }
    out.finish()
}

fn split_years(crudes: &[CrudeEffect]) -> BTreeMap<i32, Vec<CrudeEffect>> {
    let mut m: BTreeMap<i32, Vec<CrudeEffect>> = BTreeMap::new();
    for c in crudes {
        m.entry(c.year).or_default().push(c.clone());
    }
    m
}

pub fn cmd_rank(args: &RankArgs) -> Result<()> {
    check_level(args.level)?;
    prepare_out(&args.output)?;
    let strata = load_strata(&args.input.input, args.input.mode, &args.input.stratify_by, args.input.min_information)?;
    let method = PriorMethod::from(args.estimator);
    let reports = run_all(strata, |mut s| {
        let base = label(&s.key);
        let mut reports = Vec::new();
        let mut first_err = None;
        for (year, crudes) in split_years(&s.crudes) {
            let lbl = format!("{base}_{year}");
            match rank_stratum(&lbl, &crudes, method, args.level, &args.output) {
                Ok(r) => {
                    s.log.note(&base, r.summary_line());
                    reports.push(r);
                }
                Err(e) => {
                    s.log.note(&base, format!("{lbl} failed: {e}"));
                    first_err.get_or_insert(e);
                }
            }
        }
        s.log.write(&args.output, &base)?;
        match first_err {
            Some(e) => Err(e),
            None => Ok(reports),
        }
    })?;
    for r in reports.iter().flatten() {
        println!("{}", r.summary_line());
    }
    Ok(())
}

/// Model parameters supplied instead of fitted.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    pub years: Vec<i32>,
    pub time_origin: Option<i32>,
    #[serde(rename = "model")]
    pub models: Vec<FixtureModel>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureModel {
    pub name: String,
    pub structure: Structure,
    pub log_likelihood: f64,
    pub mean: Option<Vec<f64>>,
    pub params: BTreeMap<String, f64>,
    /// Overrides `--extrapolate` for this model.
    pub extrapolate: Option<String>,
}

impl Fixture {
    pub fn load(path: &Path) -> Result<Fixture> {
        Ok(toml::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn build(&self) -> Result<Vec<(String, LongitudinalModel, Option<ExtrapolationPolicy>)>> {
        self.models
            .iter()
            .map(|m| {
                let model = LongitudinalModel::from_params(
                    m.structure,
                    self.years.clone(),
                    m.mean.clone(),
                    m.params.clone(),
                    self.time_origin,
                    m.log_likelihood,
                )?;
                let policy = m.extrapolate.as_deref().map(str::parse).transpose()?;
                Ok((m.name.clone(), model, policy))
            })
            .collect()
    }
}

/// One fitted (or supplied) model with its extrapolation and predictions.
#[derive(Debug, Clone, Serialize)]
pub struct ModelEntry {
    pub name: String,
    pub model: LongitudinalModel,
    pub fit: FitStats,
    pub next_year: Option<i32>,
    pub mu_next: Option<f64>,
    pub tau2_next: Option<f64>,
    pub extrapolation: Option<String>,
    pub predictive_ra: Option<f64>,
    #[serde(skip)]
    pub predictions: Vec<(PredictiveDistribution, f64)>,
}

/// Table of log-likelihoods, parameter counts, both AIC conventions and the
/// extrapolated mean and variance.
pub fn comparison_table(entries: &[ModelEntry]) -> String {
    let mut s = String::new();
    let opt = |v: Option<f64>| v.map_or("-".to_string(), fmt_g);
    let _ = writeln!(
        s,
        "{:<22} {:>12} {:>8} {:>12} {:>14} {:>10} {:>10} {:>10}",
        "model", "loglik", "params", "aic", "-2ll+2k", "mean_next", "var_next", "RA_next"
    );
    for e in entries {
        let _ = writeln!(
            s,
            "{:<22} {:>12} {:>8} {:>12} {:>14} {:>10} {:>10} {:>10}",
            e.name,
            format!("{:.2}", e.fit.log_likelihood),
            e.fit.n_params,
            format!("{:.2}", e.fit.aic),
            format!("{:.2}", e.fit.aic_textbook),
            opt(e.mu_next),
            opt(e.tau2_next),
            opt(e.predictive_ra)
        );
    }
    s
}

fn model_details(e: &ModelEntry) -> String {
    let mut s = String::new();
    let m = &e.model;
    let _ = writeln!(s, "[{}] structure={} years={:?}", e.name, m.structure.short_name(), m.years);
    let _ = writeln!(s, "  mean: {}", m.mean.iter().map(|v| fmt_g(*v)).collect::<Vec<_>>().join(" "));
    let _ = writeln!(s, "  covariance:");
    for row in &m.cov {
        let _ = writeln!(s, "    {}", row.iter().map(|v| format!("{:>10}", fmt_g(*v))).collect::<String>());
    }
    for (k, v) in &m.structure_params {
        let _ = writeln!(s, "  {k} = {}", fmt_g(*v));
    }
    let _ = writeln!(
        s,
        "  mean params {} + covariance params {}; converged={} iterations={}",
        m.n_mean_params, m.n_cov_params, m.converged, m.iterations
    );
    if let Some(p) = &e.extrapolation {
        let _ = writeln!(s, "  extrapolation: {p}");
    }
    for n in &m.notes {
        let _ = writeln!(s, "  note: {n}");
    }
    s
}

fn longitudinal_entry(
    name: String,
    model: LongitudinalModel,
    policy: ExtrapolationPolicy,
    panel: Option<&Panel>,
) -> Result<ModelEntry> {
    let fit = model_fit_stats(&model);
    let mut entry = ModelEntry {
        name,
        fit,
        next_year: None,
        mu_next: None,
        tau2_next: None,
        extrapolation: None,
        predictive_ra: None,
        predictions: Vec::new(),
        model,
    };
    if entry.model.structure == Structure::Unstructured {
        entry.model.notes.push("unstructured covariance: no extrapolation".into());
        return Ok(entry);
    }
    let ext = extrapolate(&entry.model, policy)?;
    entry.next_year = Some(ext.next_year());
    entry.mu_next = Some(ext.mu_next());
    entry.tau2_next = Some(ext.tau2_next());
    entry.extrapolation = Some(ext.policy.to_string());
    if let Some(panel) = panel {
        let preds = predict_panel(&ext, panel)?;
        let (rows, ra) = predictive_ranking(&preds, ext.mu_next(), ext.tau2_next());
        entry.predictive_ra = Some(ra.ra);
        entry.predictions = preds.into_iter().zip(rows.iter().map(|r| r.epc)).collect();
    }
    Ok(entry)
}

fn write_longitudinal(lbl: &str, entries: &[ModelEntry], level: f64, out: &OutputArgs) -> Result<()> {
    let ts = !out.no_timestamp;
    let dir = &out.out;
    let z = two_sided_z(level);
    let mut report = String::new();
    if ts {
        report.push_str(&io::timestamp_line());
        report.push('\n');
    }
    report.push_str(&comparison_table(entries));
    report.push('\n');
    for e in entries {
        report.push_str(&model_details(e));
        report.push('\n');
    }
    std::fs::write(dir.join(format!("report_{lbl}.txt")), report)?;
    std::fs::write(dir.join(format!("models_{lbl}.json")), serde_json::to_string_pretty(entries)? + "\n")?;

    let predicted: Vec<&ModelEntry> = entries.iter().filter(|e| !e.predictions.is_empty()).collect();
    for e in &predicted {
        let tag = sanitize(&e.name);
        let mut csv = CsvOut::create(
            &dir.join(format!("predictions_{lbl}_{tag}.csv")),
            &["centre_id", "pred_mean", "pred_var", "years_used", "epc"],
            ts,
        )?;
        let mut intervals = Vec::new();
        for (p, epc) in &e.predictions {
            let years = p.years_used.iter().map(i32::to_string).collect::<Vec<_>>().join(";");
            csv.row(&[p.centre_id.clone(), fmt_g(p.mean), fmt_g(p.variance), years, fmt_g(*epc)])?;
            let half = z * p.variance.sqrt();
            intervals.push((p.centre_id.clone(), p.mean, p.mean - half, p.mean + half));
        }
        csv.finish()?;
        io::write_intervals(&dir.join(format!("predicted_intervals_{lbl}_{tag}.csv")), &intervals, ts)?;
    }
    if predicted.len() >= 2 {
        let tags: Vec<String> = predicted.iter().map(|e| format!("epc_{}", sanitize(&e.name))).collect();
        let mut header = vec!["centre_id"];
        header.extend(tags.iter().map(String::as_str));
        let mut csv = CsvOut::create(&dir.join(format!("epc_comparison_{lbl}.csv")), &header, ts)?;
        for k in 0..predicted[0].predictions.len() {
            let mut row = vec![predicted[0].predictions[k].0.centre_id.clone()];
            row.extend(predicted.iter().map(|e| fmt_g(e.predictions[k].1)));
            csv.row(&row)?;
        }
        csv.finish()?;
    }
    Ok(())
}

fn fit_stratum(
    lbl: &str,
    crudes: &[CrudeEffect],
    args: &LongitudinalArgs,
    log: &mut StratumLog,
) -> Result<Vec<ModelEntry>> {
    let years: std::collections::BTreeSet<i32> = crudes.iter().map(|c| c.year).collect();
    if years.len() < 2 {
        return Err(Error::invalid(format!(
            "stratum {lbl} has a single year; use `ebmon rank` for single-year analysis"
        )));
    }
    let panel = assemble_panel(crudes)?;
    let mut entries = Vec::new();
    for &structure in &args.structures {
        let model = longitudinal::fit(&panel, structure)?;
        log.note(
            lbl,
            format!(
                "{}: loglik {} after {} iterations{}",
                structure.short_name(),
                fmt_g(model.log_likelihood),
                model.iterations,
                if model.boundary_flag { " (correlation on the search boundary)" } else { "" }
            ),
        );
        if !model.converged {
            log.note(lbl, format!("{}: EM did not converge", structure.short_name()));
        }
        entries.push(longitudinal_entry(structure.short_name().to_string(), model, args.extrapolate, Some(&panel))?);
    }
    Ok(entries)
}

pub fn cmd_longitudinal(args: &LongitudinalArgs) -> Result<()> {
    check_level(args.level)?;
    prepare_out(&args.output)?;
    if let Some(path) = &args.fixture {
        let fixture = Fixture::load(path)?;
        let panel = match &args.input {
            Some(input) => {
                let strata = load_strata(input, args.mode, &[], args.min_information)?;
                let crudes: Vec<CrudeEffect> = strata.into_iter().flat_map(|s| s.crudes).collect();
                Some(assemble_panel(&crudes)?)
            }
            None => None,
        };
        let entries = fixture
            .build()?
            .into_iter()
            .map(|(name, model, policy)| {
                longitudinal_entry(name, model, policy.unwrap_or(args.extrapolate), panel.as_ref())
            })
            .collect::<Result<Vec<_>>>()?;
        write_longitudinal("fixture", &entries, args.level, &args.output)?;
        print!("{}", comparison_table(&entries));
        return Ok(());
    }
    let input = args
        .input
        .as_ref()
        .ok_or_else(|| Error::invalid("longitudinal needs --input or --fixture"))?;
    if args.structures.is_empty() {
        return Err(Error::invalid("no --structure requested"));
    }
    let strata = load_strata(input, args.mode, &args.stratify_by, args.min_information)?;
    let tables = run_all(strata, |mut s| {
        let lbl = label(&s.key);
        let result = fit_stratum(&lbl, &s.crudes, args, &mut s.log);
        if let Err(e) = &result {
            s.log.note(&lbl, format!("failed: {e}"));
        }
        s.log.write(&args.output, &lbl)?;
        let entries = result?;
        write_longitudinal(&lbl, &entries, args.level, &args.output)?;
        Ok(format!("{lbl}\n{}", comparison_table(&entries)))
    })?;
    for t in tables {
        print!("{t}");
    }
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let mut config = ScenarioConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    prepare_out(&args.output)?;
    let data = simulation::simulate(&config)?;
    let ts = !args.output.no_timestamp;
    let dir = &args.output.out;
    let mut truth = CsvOut::create(&dir.join("truth.csv"), &["centre_id", "year", "theta"], ts)?;
    for (i, id) in data.centres.iter().enumerate() {
        for (j, year) in data.years.iter().enumerate() {
            truth.row(&[id.clone(), year.to_string(), fmt_g(data.true_effects[i][j])])?;
        }
    }
    truth.finish()?;
    io::write_crudes(&dir.join("crude.csv"), &data.crudes, ts)?;
    if let Some(p) = &data.patients {
        io::write_patients(&dir.join("patients.csv"), p, ts)?;
    }
    if let Some(s) = &data.summaries {
        io::write_summaries(&dir.join("summary.csv"), s, ts)?;
    }
    std::fs::write(dir.join("scenario.toml"), toml::to_string(&config).map_err(|e| Error::invalid(e.to_string()))?)?;
    println!(
        "simulated {} centres x {} years: {} crude effects",
        data.centres.len(),
        data.years.len(),
        data.crudes.len()
    );
    Ok(())
}
