use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::dataset::{Field, SampleRecord};
use crate::error::{Error, Result};

/// Destination of a source column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Canonical {
    Timestamp,
    Field(Field),
}

impl FromStr for Canonical {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "timestamp" {
            Ok(Self::Timestamp)
        } else {
            s.parse().map(Self::Field)
        }
    }
}

impl TryFrom<String> for Canonical {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Canonical> for String {
    fn from(c: Canonical) -> String {
        c.to_string()
    }
}

impl fmt::Display for Canonical {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Timestamp => f.write_str("timestamp"),
            Self::Field(field) => f.write_str(field.name()),
        }
    }
}

/// How timestamp cells are read. All times are UTC.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum TimestampFormat {
    /// Epoch seconds, falling back to ISO-8601.
    #[default]
    Auto,
    Epoch,
    Iso8601,
    /// A `chrono` format string such as `%d/%m/%Y %H:%M`.
    Custom(String),
}

impl From<String> for TimestampFormat {
    fn from(s: String) -> Self {
        match s.as_str() {
            "auto" => Self::Auto,
            "epoch" => Self::Epoch,
            "iso8601" => Self::Iso8601,
            _ => Self::Custom(s),
        }
    }
}

impl From<TimestampFormat> for String {
    fn from(f: TimestampFormat) -> String {
        match f {
            TimestampFormat::Auto => "auto".into(),
            TimestampFormat::Epoch => "epoch".into(),
            TimestampFormat::Iso8601 => "iso8601".into(),
            TimestampFormat::Custom(s) => s,
        }
    }
}

/// Native unit of a source column; values are converted to the canonical
/// unit of their field on read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnitHint {
    #[serde(rename = "celsius")]
    Celsius,
    #[serde(rename = "fahrenheit")]
    Fahrenheit,
    #[serde(rename = "kelvin")]
    Kelvin,
    #[serde(rename = "km/h")]
    KmPerHour,
    #[serde(rename = "m/s")]
    MetersPerSecond,
    #[serde(rename = "mph")]
    MilesPerHour,
    #[serde(rename = "ug/m3")]
    MicrogramsPerM3,
    #[serde(rename = "mg/m3")]
    MilligramsPerM3,
}

impl UnitHint {
    pub fn to_canonical(self, v: f64) -> f64 {
        match self {
            Self::Celsius | Self::KmPerHour | Self::MicrogramsPerM3 => v,
            Self::Fahrenheit => (v - 32.0) * 5.0 / 9.0,
            Self::Kelvin => v - 273.15,
            Self::MetersPerSecond => v * 3.6,
            Self::MilesPerHour => v * 1.609_344,
            Self::MilligramsPerM3 => v * 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    /// Source column name to canonical destination.
    pub columns: BTreeMap<String, Canonical>,
    pub timestamp_format: TimestampFormat,
    /// Native units keyed by source column name.
    pub units: BTreeMap<String, UnitHint>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self::canonical()
    }
}

impl ColumnMapping {
    /// Identity mapping for the canonical dialect.
    pub fn canonical() -> Self {
        let mut columns = BTreeMap::new();
        columns.insert("timestamp".to_string(), Canonical::Timestamp);
        for f in Field::ALL {
            columns.insert(f.name().to_string(), Canonical::Field(f));
        }
        Self {
            columns,
            timestamp_format: TimestampFormat::Auto,
            units: BTreeMap::new(),
        }
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, Canonical)>) -> Self {
        Self {
            columns: pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            timestamp_format: TimestampFormat::Auto,
            units: BTreeMap::new(),
        }
    }

    fn source_of(&self, target: Canonical) -> Option<&str> {
        self.columns.iter().find(|(_, t)| **t == target).map(|(k, _)| k.as_str())
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeMap::new();
        for (src, target) in &self.columns {
            if let Some(prev) = seen.insert(*target, src) {
                return Err(Error::BadConfig(format!(
                    "columns `{prev}` and `{src}` both map to `{target}`"
                )));
            }
        }
        for mandatory in [Canonical::Timestamp, Canonical::Field(Field::S)] {
            if !seen.contains_key(&mandatory) {
                return Err(Error::MissingMandatoryColumn(mandatory.to_string()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub rows: usize,
    pub rejected_timestamps: usize,
    /// Non-empty cells that could not be read as finite numbers.
    pub cell_warnings: usize,
    pub ignored_columns: Vec<String>,
}

pub fn parse_timestamp(cell: &str, format: &TimestampFormat) -> Option<i64> {
    let cell = cell.trim();
    match format {
        TimestampFormat::Epoch => parse_epoch(cell),
        TimestampFormat::Iso8601 => parse_iso(cell),
        TimestampFormat::Auto => parse_epoch(cell).or_else(|| parse_iso(cell)),
        TimestampFormat::Custom(fmt) => NaiveDateTime::parse_from_str(cell, fmt)
            .map(|t| t.and_utc().timestamp())
            .or_else(|_| DateTime::parse_from_str(cell, fmt).map(|t| t.timestamp()))
            .ok(),
    }
}

fn parse_epoch(cell: &str) -> Option<i64> {
    if let Ok(v) = cell.parse::<i64>() {
        return Some(v);
    }
    let v = cell.parse::<f64>().ok()?;
    (v.is_finite() && v.abs() < 9.0e15).then(|| v.floor() as i64)
}

fn parse_iso(cell: &str) -> Option<i64> {
    if let Ok(t) = DateTime::parse_from_rfc3339(cell) {
        return Some(t.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(cell, fmt) {
            return Some(t.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(cell, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|t| t.and_utc().timestamp())
}

/// Reads a headed, comma-separated stream into records.
///
/// Unmapped columns are ignored. Empty cells are missing values; cells that
/// do not parse as finite numbers are missing values and counted as
/// warnings. Rows whose timestamp cannot be read are dropped and counted.
pub fn parse_csv<R: Read>(input: R, mapping: &ColumnMapping) -> Result<(Vec<SampleRecord>, ParseReport)> {
    mapping.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader.headers()?.clone();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(Error::MissingHeader);
    }
    let position = |name: &str| header.iter().position(|h| h == name);

    let ts_source = mapping.source_of(Canonical::Timestamp).unwrap_or("timestamp");
    let ts_col = position(ts_source).ok_or_else(|| Error::MissingMandatoryColumn(ts_source.to_string()))?;
    let s_source = mapping.source_of(Canonical::Field(Field::S)).unwrap_or("s");
    if position(s_source).is_none() {
        return Err(Error::MissingMandatoryColumn(s_source.to_string()));
    }

    let mut fields: Vec<(usize, Field, Option<UnitHint>)> = Vec::new();
    for (src, target) in &mapping.columns {
        if let (Canonical::Field(f), Some(col)) = (target, position(src)) {
            fields.push((col, *f, mapping.units.get(src).copied()));
        }
    }
    let mut report = ParseReport {
        ignored_columns: header
            .iter()
            .filter(|h| !mapping.columns.contains_key(*h))
            .map(str::to_string)
            .collect(),
        ..Default::default()
    };

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        if row.iter().all(|c| c.is_empty()) {
            continue;
        }
        report.rows += 1;
        let Some(ts) = row.get(ts_col).and_then(|c| parse_timestamp(c, &mapping.timestamp_format)) else {
            report.rejected_timestamps += 1;
            continue;
        };
        let mut rec = SampleRecord::new(ts);
        for &(col, field, unit) in &fields {
            let cell = row.get(col).unwrap_or("");
            if cell.is_empty() {
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => {
                    rec.set(field, Some(unit.map_or(v, |u| u.to_canonical(v))));
                }
                _ => report.cell_warnings += 1,
            }
        }
        records.push(rec);
    }
    if report.rows == 0 {
        return Err(Error::EmptyFile);
    }
    Ok((records, report))
}
