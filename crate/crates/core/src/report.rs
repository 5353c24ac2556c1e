//! Rendering of sweep reports.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::pipeline::{EvalReport, USEPA_MIN_R2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Aligned text table for people.
    Table,
    /// Pretty-printed JSON that parses back into an equal [`EvalReport`].
    Machine,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(Self::Table),
            "machine" | "json" => Ok(Self::Machine),
            other => Err(Error::BadConfig(format!("unknown report format `{other}`"))),
        }
    }
}

pub fn emit_report(report: &EvalReport, format: ReportFormat) -> Result<String> {
    if report.rows.is_empty() {
        return Err(Error::EmptyReport);
    }
    match format {
        ReportFormat::Machine => Ok(serde_json::to_string_pretty(report)? + "\n"),
        ReportFormat::Table => Ok(table(report)),
    }
}

pub fn parse_machine_report(text: &str) -> Result<EvalReport> {
    Ok(serde_json::from_str(text)?)
}

fn table(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "data: {} ({} records, fingerprint {})",
        report.data.name, report.data.n_records, report.data.fingerprint
    );
    let _ = writeln!(
        out,
        "repetitions: {}  train fraction: {}  seeds: {:?}",
        report.config.repetitions, report.config.train_fraction, report.seeds
    );
    let width = report
        .rows
        .iter()
        .map(|r| r.subset.label().len())
        .max()
        .unwrap_or(0)
        .max("features".len());
    let _ = writeln!(
        out,
        "{:<6} {:<width$}  {:>17}  {:>17}  {:>17}  {:>17}  USEPA",
        "model", "features", "train R2", "train RMSE", "test R2", "test RMSE"
    );
    for row in &report.rows {
        let star = if row.best { "*" } else { " " };
        let label = format!("{}{}", row.subset.label(), star);
        let _ = writeln!(
            out,
            "{:<6} {:<width$}  {:>17}  {:>17}  {:>17}  {:>17}  {}",
            row.kind.to_string(),
            label,
            pm(row.train.r2, row.train.r2_std),
            pm(row.train.rmse, row.train.rmse_std),
            pm(row.test.r2, row.test.r2_std),
            pm(row.test.rmse, row.test.rmse_std),
            if row.meets_usepa { "yes" } else { "no" },
            width = width + 1,
        );
    }
    let _ = writeln!(
        out,
        "* best feature subset per model; USEPA: mean test R2 >= {USEPA_MIN_R2}"
    );
    out
}

fn pm(mean: f64, std: f64) -> String {
    format!("{mean:.4} ± {std:.4}")
}
