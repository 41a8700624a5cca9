//! CSV input and output.
//!
//! Readers skip lines starting with `#` and address columns by header name,
//! so column order is free and extra columns are ignored unless requested as
//! stratum columns. Writers format every float with 6 significant digits and
//! optionally prepend a `# generated ...` line.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::stage1::{CentreYearSummary, CrudeEffect, PatientRecord};

/// A record with the values of its stratum columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Tagged<T> {
    pub stratum: Vec<String>,
    pub item: T,
}

/// `%g`-style formatting with 6 significant digits. Non-finite values are
/// written as `NA`, `inf` or `-inf`.
pub fn fmt_g(x: f64) -> String {
    if x.is_nan() {
        return "NA".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        return format!("{}e{exp}", trim_zeros(mantissa));
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

struct Table {
    columns: HashMap<String, usize>,
    rows: Vec<csv::StringRecord>,
    path: String,
}

impl Table {
    fn read(path: &Path) -> Result<Table> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)?;
        let header = rdr.headers()?.clone();
        let mut columns = HashMap::new();
        for (k, name) in header.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::invalid(format!("{}: empty column name at position {}", path.display(), k + 1)));
            }
            if columns.insert(name.to_string(), k).is_some() {
                return Err(Error::invalid(format!("{}: duplicate column `{name}`", path.display())));
            }
        }
        let rows = rdr.records().collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Table {
            columns,
            rows,
            path: path.display().to_string(),
        })
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.columns
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingColumn(format!("{name} (in {})", self.path)))
    }

    fn cols(&self, names: &[String]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.col(n)).collect()
    }

    fn parse<T: std::str::FromStr>(&self, row: usize, col: usize, name: &str) -> Result<T> {
        let raw = &self.rows[row][col];
        raw.parse().map_err(|_| {
            Error::invalid(format!(
                "{}: line {}: column `{name}` has invalid value `{raw}`",
                self.path,
                row + 2
            ))
        })
    }

    fn stratum(&self, row: usize, cols: &[usize]) -> Vec<String> {
        cols.iter().map(|&c| self.rows[row][c].to_string()).collect()
    }
}

/// Patient CSV: `centre_id,year,outcome,x1,...,xp` with `x1` the constant 1.
pub fn read_patients(path: &Path, stratify_by: &[String]) -> Result<Vec<Tagged<PatientRecord>>> {
    let t = Table::read(path)?;
    let (c_id, c_year, c_out) = (t.col("centre_id")?, t.col("year")?, t.col("outcome")?);
    let mut xs: Vec<(usize, usize)> = t
        .columns
        .iter()
        .filter_map(|(name, &k)| {
            name.strip_prefix('x')
                .and_then(|d| d.parse::<usize>().ok())
                .map(|d| (d, k))
        })
        .collect();
    xs.sort_unstable();
    if xs.is_empty() || xs[0].0 != 1 {
        return Err(Error::MissingColumn(format!("x1 (in {})", t.path)));
    }
    if let Some(w) = xs.windows(2).find(|w| w[1].0 != w[0].0 + 1) {
        return Err(Error::MissingColumn(format!("x{} (in {})", w[0].0 + 1, t.path)));
    }
    let strat = t.cols(stratify_by)?;
    let mut out = Vec::with_capacity(t.rows.len());
    for r in 0..t.rows.len() {
        let outcome: u8 = t.parse(r, c_out, "outcome")?;
        if outcome > 1 {
            return Err(Error::invalid(format!("{}: line {}: outcome must be 0 or 1", t.path, r + 2)));
        }
        let covariates = xs
            .iter()
            .map(|&(d, k)| t.parse::<f64>(r, k, &format!("x{d}")))
            .collect::<Result<Vec<f64>>>()?;
        if covariates[0] != 1.0 {
            return Err(Error::invalid(format!("{}: line {}: x1 must be the constant 1", t.path, r + 2)));
        }
        out.push(Tagged {
            stratum: t.stratum(r, &strat),
            item: PatientRecord {
                centre_id: t.rows[r][c_id].to_string(),
                year: t.parse(r, c_year, "year")?,
                outcome,
                covariates,
            },
        });
    }
    Ok(out)
}

/// Summary CSV: `centre_id,year,n,observed,expected,information`.
pub fn read_summaries(path: &Path, stratify_by: &[String]) -> Result<Vec<Tagged<CentreYearSummary>>> {
    let t = Table::read(path)?;
    let names = ["centre_id", "year", "n", "observed", "expected", "information"];
    let c: Vec<usize> = names.iter().map(|n| t.col(n)).collect::<Result<_>>()?;
    let strat = t.cols(stratify_by)?;
    (0..t.rows.len())
        .map(|r| {
            let s = CentreYearSummary {
                centre_id: t.rows[r][c[0]].to_string(),
                year: t.parse(r, c[1], names[1])?,
                n: t.parse(r, c[2], names[2])?,
                observed: t.parse(r, c[3], names[3])?,
                expected: t.parse(r, c[4], names[4])?,
                information: t.parse(r, c[5], names[5])?,
            };
            s.validate()?;
            Ok(Tagged { stratum: t.stratum(r, &strat), item: s })
        })
        .collect()
}

/// Crude CSV: `centre_id,year,theta_hat,s2`.
pub fn read_crudes(path: &Path, stratify_by: &[String]) -> Result<Vec<Tagged<CrudeEffect>>> {
    let t = Table::read(path)?;
    let names = ["centre_id", "year", "theta_hat", "s2"];
    let c: Vec<usize> = names.iter().map(|n| t.col(n)).collect::<Result<_>>()?;
    let strat = t.cols(stratify_by)?;
    (0..t.rows.len())
        .map(|r| {
            let item = CrudeEffect {
                centre_id: t.rows[r][c[0]].to_string(),
                year: t.parse(r, c[1], names[1])?,
                theta_hat: t.parse(r, c[2], names[2])?,
                s2: t.parse(r, c[3], names[3])?,
            };
            if !item.theta_hat.is_finite() || !(item.s2 > 0.0) || !item.s2.is_finite() {
                return Err(Error::invalid(format!(
                    "{}: line {}: need finite theta_hat and s2 > 0",
                    t.path,
                    r + 2
                )));
            }
            Ok(Tagged { stratum: t.stratum(r, &strat), item })
        })
        .collect()
}

/// Buffered CSV writer producing the documented number format.
pub struct CsvOut {
    w: BufWriter<File>,
}

impl CsvOut {
    pub fn create(path: &Path, header: &[&str], timestamp: bool) -> Result<CsvOut> {
        let mut w = BufWriter::new(File::create(path)?);
        if timestamp {
            writeln!(w, "{}", timestamp_line())?;
        }
        writeln!(w, "{}", header.join(","))?;
        Ok(CsvOut { w })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        let quoted: Vec<String> = fields.iter().map(|f| quote(f)).collect();
        writeln!(self.w, "{}", quoted.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub fn timestamp_line() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("# generated by ebmon {} at unix time {secs}", env!("CARGO_PKG_VERSION"))
}

pub fn write_patients(path: &Path, patients: &[PatientRecord], timestamp: bool) -> Result<()> {
    let p = patients.first().map_or(1, |r| r.covariates.len());
    let xs: Vec<String> = (1..=p).map(|k| format!("x{k}")).collect();
    let mut header = vec!["centre_id", "year", "outcome"];
    header.extend(xs.iter().map(String::as_str));
    let mut out = CsvOut::create(path, &header, timestamp)?;
    for r in patients {
        let mut f = vec![r.centre_id.clone(), r.year.to_string(), r.outcome.to_string()];
        f.extend(r.covariates.iter().map(|&x| fmt_g(x)));
        out.row(&f)?;
    }
    out.finish()
}

pub fn write_summaries(path: &Path, summaries: &[CentreYearSummary], timestamp: bool) -> Result<()> {
    let mut out = CsvOut::create(
        path,
        &["centre_id", "year", "n", "observed", "expected", "information"],
        timestamp,
    )?;
    for s in summaries {
        out.row(&[
            s.centre_id.clone(),
            s.year.to_string(),
            s.n.to_string(),
            fmt_g(s.observed),
            fmt_g(s.expected),
            fmt_g(s.information),
        ])?;
    }
    out.finish()
}

pub fn write_crudes(path: &Path, crudes: &[CrudeEffect], timestamp: bool) -> Result<()> {
    let mut out = CsvOut::create(path, &["centre_id", "year", "theta_hat", "s2"], timestamp)?;
    for c in crudes {
        out.row(&[c.centre_id.clone(), c.year.to_string(), fmt_g(c.theta_hat), fmt_g(c.s2)])?;
    }
    out.finish()
}

/// Interval plot data `centre_id,estimate,lo,hi`, sorted by estimate and
/// then centre.
pub fn write_intervals(path: &Path, rows: &[(String, f64, f64, f64)], timestamp: bool) -> Result<()> {
    let mut sorted: Vec<&(String, f64, f64, f64)> = rows.iter().collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let mut out = CsvOut::create(path, &["centre_id", "estimate", "lo", "hi"], timestamp)?;
    for r in sorted {
        out.row(&[r.0.clone(), fmt_g(r.1), fmt_g(r.2), fmt_g(r.3)])?;
    }
    out.finish()
}
