//! Tabular data model: sample records, feature specs, normalization and
//! train/test partitioning.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Name of the reference (target) column.
pub const TARGET: &str = "y";

/// One timestamped observation. Every measured field may be missing.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SampleRecord {
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: i64,
    /// Low-cost sensor reading, µg/m³.
    pub s: Option<f64>,
    /// Temperature, °C.
    pub t: Option<f64>,
    /// Relative humidity, %.
    pub rh: Option<f64>,
    /// Reference instrument reading, µg/m³.
    pub y: Option<f64>,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    /// Vehicle speed, km/h.
    pub speed: Option<f64>,
}

impl SampleRecord {
    pub fn new(timestamp: i64) -> Self {
        Self {
            timestamp,
            ..Self::default()
        }
    }

    pub fn get(&self, field: Field) -> Option<f64> {
        match field {
            Field::S => self.s,
            Field::T => self.t,
            Field::Rh => self.rh,
            Field::Y => self.y,
            Field::Lat => self.lat,
            Field::Lon => self.lon,
            Field::Speed => self.speed,
        }
    }

    pub fn set(&mut self, field: Field, value: Option<f64>) {
        let slot = match field {
            Field::S => &mut self.s,
            Field::T => &mut self.t,
            Field::Rh => &mut self.rh,
            Field::Y => &mut self.y,
            Field::Lat => &mut self.lat,
            Field::Lon => &mut self.lon,
            Field::Speed => &mut self.speed,
        };
        *slot = value;
    }

    /// Checks the physical invariants a cleaned record must satisfy.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.timestamp <= 0 {
            return Err(format!("timestamp {} is not positive", self.timestamp));
        }
        if let Some(rh) = self.rh {
            if !(0.0..=100.0).contains(&rh) {
                return Err(format!("rh {rh} outside [0, 100]"));
            }
        }
        for (name, v) in [("s", self.s), ("y", self.y)] {
            if let Some(v) = v {
                if v < 0.0 {
                    return Err(format!("{name} {v} is negative"));
                }
            }
        }
        Ok(())
    }
}

/// Measured (non-timestamp) record fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    S,
    T,
    Rh,
    Y,
    Lat,
    Lon,
    Speed,
}

impl Field {
    pub const ALL: [Field; 7] = [
        Field::S,
        Field::T,
        Field::Rh,
        Field::Y,
        Field::Lat,
        Field::Lon,
        Field::Speed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::S => "s",
            Field::T => "t",
            Field::Rh => "rh",
            Field::Y => "y",
            Field::Lat => "lat",
            Field::Lon => "lon",
            Field::Speed => "speed",
        }
    }
}

impl FromStr for Field {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Field::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::BadConfig(format!("unknown field `{s}`")))
    }
}

/// A calibration input column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Feature {
    S,
    T,
    Rh,
    /// Sensor reading delayed by the given number of buckets.
    SLag(usize),
}

impl Feature {
    pub fn name(&self) -> String {
        match self {
            Feature::S => "s".into(),
            Feature::T => "t".into(),
            Feature::Rh => "rh".into(),
            Feature::SLag(k) => format!("s_lag{k}"),
        }
    }

    fn source(&self) -> Field {
        match self {
            Feature::S | Feature::SLag(_) => Field::S,
            Feature::T => Field::T,
            Feature::Rh => Field::Rh,
        }
    }

    fn lag(&self) -> usize {
        match self {
            Feature::SLag(k) => *k,
            _ => 0,
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "s" => Ok(Feature::S),
            "t" => Ok(Feature::T),
            "rh" => Ok(Feature::Rh),
            other => other
                .strip_prefix("s_lag")
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k >= 1)
                .map(Feature::SLag)
                .ok_or_else(|| Error::InvalidFeatureSpec(format!("unknown feature `{other}`"))),
        }
    }
}

impl Serialize for Feature {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for Feature {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ordered list of calibration inputs. The target is always `y`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct FeatureSpec {
    features: Vec<Feature>,
}

impl FeatureSpec {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidFeatureSpec("no features".into()));
        }
        if !features.contains(&Feature::S) {
            return Err(Error::InvalidFeatureSpec("`s` must be present".into()));
        }
        for (i, f) in features.iter().enumerate() {
            if features[..i].contains(f) {
                return Err(Error::InvalidFeatureSpec(format!("duplicate feature `{f}`")));
            }
        }
        Ok(Self { features })
    }

    /// Parses a comma-separated list such as `s,t,rh,s_lag1`.
    pub fn parse(list: &str) -> Result<Self> {
        let features = list
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        Self::new(features)
    }

    /// `{s, t, rh}`.
    pub fn phi() -> Self {
        Self {
            features: vec![Feature::S, Feature::T, Feature::Rh],
        }
    }

    /// `{s, t, rh, s_lag1}`.
    pub fn phi_prime() -> Self {
        Self {
            features: vec![Feature::S, Feature::T, Feature::Rh, Feature::SLag(1)],
        }
    }

    /// The subsets swept by default: `{s}`, `{s,t}`, `{s,rh}`, `{s,t,rh}`.
    pub fn standard_subsets() -> Vec<Self> {
        ["s", "s,t", "s,rh", "s,t,rh"]
            .iter()
            .map(|l| Self::parse(l).expect("static spec"))
            .collect()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(Feature::name).collect()
    }

    pub fn max_lag(&self) -> usize {
        self.features.iter().map(Feature::lag).max().unwrap_or(0)
    }

    /// Label used in reports, e.g. `s+t+rh`.
    pub fn label(&self) -> String {
        self.names().join("+")
    }
}

impl FromStr for FeatureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl fmt::Display for FeatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.names().join(","))
    }
}

/// Accepts either a list of feature names or one comma-separated string.
impl<'de> Deserialize<'de> for FeatureSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            List(Vec<Feature>),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::List(features) => FeatureSpec::new(features),
            Repr::Text(list) => FeatureSpec::parse(&list),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub std: f64,
}

/// Per-column mean/standard-deviation pairs, keyed by column name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NormParams {
    columns: BTreeMap<String, ColumnStats>,
}

impl NormParams {
    /// Fits statistics for every feature column and the target of a raw
    /// dataset. Standard deviations use the N−1 divisor.
    pub fn fit(ds: &CalDataset) -> Result<Self> {
        if ds.is_normalized() {
            return Err(Error::BadConfig("dataset is already normalized".into()));
        }
        if ds.n_rows() < 2 {
            return Err(Error::EmptyInput);
        }
        let mut columns = BTreeMap::new();
        for (j, name) in ds.spec.names().into_iter().enumerate() {
            let stats = column_stats(&ds.x.column(j), &name)?;
            columns.insert(name, stats);
        }
        columns.insert(TARGET.to_string(), column_stats(&ds.y, TARGET)?);
        Ok(Self { columns })
    }

    pub fn from_columns(columns: BTreeMap<String, ColumnStats>) -> Result<Self> {
        for (name, s) in &columns {
            if !(s.std > 0.0 && s.std.is_finite() && s.mean.is_finite()) {
                return Err(Error::ZeroVariance(name.clone()));
            }
        }
        Ok(Self { columns })
    }

    pub fn get(&self, column: &str) -> Result<ColumnStats> {
        self.columns
            .get(column)
            .copied()
            .ok_or_else(|| Error::MissingColumn(column.to_string()))
    }

    pub fn columns(&self) -> &BTreeMap<String, ColumnStats> {
        &self.columns
    }

    pub fn normalize_value(&self, column: &str, value: f64) -> Result<f64> {
        let s = self.get(column)?;
        Ok((value - s.mean) / s.std)
    }
}

fn column_stats(values: &[f64], name: &str) -> Result<ColumnStats> {
    let n = values.len();
    if n < 2 {
        return Err(Error::EmptyInput);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    // Relative guard: a column whose spread is pure rounding noise counts as constant.
    if !(std > 1e-12 * mean.abs().max(f64::MIN_POSITIVE)) {
        return Err(Error::ZeroVariance(name.to_string()));
    }
    Ok(ColumnStats { mean, std })
}

/// Whether normalization statistics come from the training partition only
/// or from the full dataset before splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeScope {
    #[default]
    TrainOnly,
    Full,
}

impl FromStr for NormalizeScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train_only" => Ok(Self::TrainOnly),
            "full" => Ok(Self::Full),
            other => Err(Error::BadConfig(format!("unknown normalize scope `{other}`"))),
        }
    }
}

/// Feature rows without reference values: the only input the prediction
/// path accepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub x: Matrix,
    pub spec: FeatureSpec,
    pub timestamps: Vec<i64>,
    pub normalized: bool,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.x.n_rows()
    }

    pub fn normalize(&self, norm: &NormParams) -> Result<FeatureMatrix> {
        if self.normalized {
            return Err(Error::BadConfig("features are already normalized".into()));
        }
        let stats = self
            .spec
            .names()
            .iter()
            .map(|n| norm.get(n))
            .collect::<Result<Vec<_>>>()?;
        let mut x = self.x.clone();
        for i in 0..x.n_rows() {
            for (j, s) in stats.iter().enumerate() {
                x.set(i, j, (x.get(i, j) - s.mean) / s.std);
            }
        }
        Ok(FeatureMatrix {
            x,
            spec: self.spec.clone(),
            timestamps: self.timestamps.clone(),
            normalized: true,
        })
    }
}

/// Aligned feature matrix and target vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalDataset {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub timestamps: Vec<i64>,
    pub spec: FeatureSpec,
    /// `Some` once the dataset has been normalized with these parameters.
    pub norm: Option<NormParams>,
}

impl CalDataset {
    pub fn new(x: Matrix, y: Vec<f64>, timestamps: Vec<i64>, spec: FeatureSpec) -> Result<Self> {
        if x.n_rows() != y.len() {
            return Err(Error::ShapeMismatch {
                expected: x.n_rows(),
                got: y.len(),
            });
        }
        if x.n_cols() != spec.len() {
            return Err(Error::ShapeMismatch {
                expected: spec.len(),
                got: x.n_cols(),
            });
        }
        if timestamps.len() != y.len() {
            return Err(Error::ShapeMismatch {
                expected: y.len(),
                got: timestamps.len(),
            });
        }
        if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadConfig("dataset contains non-finite values".into()));
        }
        Ok(Self {
            x,
            y,
            timestamps,
            spec,
            norm: None,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.norm.is_some()
    }

    /// Feature view without the target column.
    pub fn features(&self) -> FeatureMatrix {
        FeatureMatrix {
            x: self.x.clone(),
            spec: self.spec.clone(),
            timestamps: self.timestamps.clone(),
            normalized: self.norm.is_some(),
        }
    }

    pub fn select_rows(&self, indices: &[usize]) -> CalDataset {
        CalDataset {
            x: self.x.select_rows(indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            timestamps: indices.iter().map(|&i| self.timestamps[i]).collect(),
            spec: self.spec.clone(),
            norm: self.norm.clone(),
        }
    }
}

/// Assembles a raw (unnormalized) dataset from time-sorted records.
///
/// Lagged columns take the sensor value `k` records earlier in the input
/// sequence, so the first `k` rows are dropped. Rows with any missing
/// feature or reference value are dropped afterwards.
pub fn assemble_features(records: &[SampleRecord], spec: &FeatureSpec) -> Result<CalDataset> {
    let rows = assemble_rows(records, spec, true)?;
    let (x, timestamps, y) = rows;
    CalDataset::new(x, y, timestamps, spec.clone())
}

/// Like [`assemble_features`] but never reads the reference column.
pub fn assemble_inputs(records: &[SampleRecord], spec: &FeatureSpec) -> Result<FeatureMatrix> {
    let (x, timestamps, _) = assemble_rows(records, spec, false)?;
    Ok(FeatureMatrix {
        x,
        spec: spec.clone(),
        timestamps,
        normalized: false,
    })
}

fn assemble_rows(
    records: &[SampleRecord],
    spec: &FeatureSpec,
    with_target: bool,
) -> Result<(Matrix, Vec<i64>, Vec<f64>)> {
    check_sorted(records, spec.max_lag() > 0)?;
    let lag = spec.max_lag();
    let mut data = Vec::new();
    let mut timestamps = Vec::new();
    let mut y = Vec::new();
    'rows: for i in lag..records.len() {
        let rec = &records[i];
        let target = if with_target {
            match rec.y {
                Some(v) => Some(v),
                None => continue,
            }
        } else {
            None
        };
        let start = data.len();
        for f in spec.features() {
            match records[i - f.lag()].get(f.source()) {
                Some(v) => data.push(v),
                None => {
                    data.truncate(start);
                    continue 'rows;
                }
            }
        }
        timestamps.push(rec.timestamp);
        if let Some(t) = target {
            y.push(t);
        }
    }
    if timestamps.is_empty() {
        return Err(Error::EmptyAfterDrop);
    }
    let x = Matrix::new(timestamps.len(), spec.len(), data)?;
    Ok((x, timestamps, y))
}

/// Records must be sorted by time; lagged features additionally need strictly
/// increasing timestamps on a common grid (every gap a multiple of the
/// smallest gap).
fn check_sorted(records: &[SampleRecord], gridded: bool) -> Result<()> {
    for (i, w) in records.windows(2).enumerate() {
        let ok = if gridded {
            w[1].timestamp > w[0].timestamp
        } else {
            w[1].timestamp >= w[0].timestamp
        };
        if !ok {
            return Err(Error::NonMonotonicTimestamps { index: i + 1 });
        }
    }
    if gridded && records.len() > 2 {
        let step = records
            .windows(2)
            .map(|w| w[1].timestamp - w[0].timestamp)
            .min()
            .unwrap_or(1);
        for (i, w) in records.windows(2).enumerate() {
            if (w[1].timestamp - w[0].timestamp) % step != 0 {
                return Err(Error::NotBucketed { index: i + 1 });
            }
        }
    }
    Ok(())
}

/// Fits normalization statistics on the rows `spec` assembles from `records`.
pub fn normalize_fit(records: &[SampleRecord], spec: &FeatureSpec) -> Result<NormParams> {
    if records.len() < 2 {
        return Err(Error::EmptyInput);
    }
    let ds = assemble_features(records, spec)?;
    NormParams::fit(&ds)
}

/// Maps every cell of a raw dataset to `(value − mean) / std`.
pub fn normalize_apply(ds: &CalDataset, norm: &NormParams) -> Result<CalDataset> {
    if ds.is_normalized() {
        return Err(Error::BadConfig("dataset is already normalized".into()));
    }
    let features = ds.features().normalize(norm)?;
    let ys = norm.get(TARGET)?;
    Ok(CalDataset {
        x: features.x,
        y: ds.y.iter().map(|v| (v - ys.mean) / ys.std).collect(),
        timestamps: ds.timestamps.clone(),
        spec: ds.spec.clone(),
        norm: Some(norm.clone()),
    })
}

/// Inverse of normalization for one column: `value · std + mean`.
pub fn denormalize(values: &[f64], norm: &NormParams, column: &str) -> Result<Vec<f64>> {
    let s = norm.get(column)?;
    Ok(values.iter().map(|v| v * s.std + s.mean).collect())
}

/// Seeded uniform row partition. Returns sorted (train, test) row indices.
///
/// The train size is `round(n · fraction)`, kept within `[1, n − 1]`.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidFraction(train_fraction));
    }
    if n < 4 {
        return Err(Error::TooFewRows { needed: 4, got: n });
    }
    let n_train = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let mut train = idx[..n_train].to_vec();
    let mut test = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn train_test_split(ds: &CalDataset, train_fraction: f64, seed: u64) -> Result<(CalDataset, CalDataset)> {
    let (train, test) = split_indices(ds.n_rows(), train_fraction, seed)?;
    Ok((ds.select_rows(&train), ds.select_rows(&test)))
}

/// Splits a raw dataset and normalizes both parts with statistics drawn
/// from `scope`. Returns `(train, test, norm)`.
pub fn split_and_normalize(
    raw: &CalDataset,
    train_fraction: f64,
    seed: u64,
    scope: NormalizeScope,
) -> Result<(CalDataset, CalDataset, NormParams)> {
    let (train, test) = train_test_split(raw, train_fraction, seed)?;
    let norm = match scope {
        NormalizeScope::TrainOnly => NormParams::fit(&train)?,
        NormalizeScope::Full => NormParams::fit(raw)?,
    };
    Ok((normalize_apply(&train, &norm)?, normalize_apply(&test, &norm)?, norm))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(ts: i64, s: f64, t: f64, rh: f64, y: f64) -> SampleRecord {
        SampleRecord {
            timestamp: ts,
            s: Some(s),
            t: Some(t),
            rh: Some(rh),
            y: Some(y),
            ..SampleRecord::default()
        }
    }

    fn spec_s() -> FeatureSpec {
        FeatureSpec::parse("s").unwrap()
    }

    #[test]
    fn stats_use_sample_divisor() {
        let records = vec![rec(60, 0.0, 1.0, 50.0, 1.0), rec(120, 10.0, 2.0, 60.0, 3.0)];
        let norm = normalize_fit(&records, &spec_s()).unwrap();
        let s = norm.get("s").unwrap();
        assert_eq!(s.mean, 5.0);
        // sqrt(((0-5)^2 + (10-5)^2) / 1) = sqrt(50)
        assert!((s.std - 7.0710678118654755).abs() < 1e-12);
    }

    #[test]
    fn constant_column_is_flagged() {
        let records: Vec<_> = (1..=3).map(|i| rec(i * 60, 4.0, 1.0, 50.0, i as f64)).collect();
        assert!(matches!(
            normalize_fit(&records, &spec_s()),
            Err(Error::ZeroVariance(c)) if c == "s"
        ));
    }

    #[test]
    fn too_few_records_for_stats() {
        let records = vec![rec(60, 1.0, 1.0, 50.0, 1.0)];
        assert!(matches!(normalize_fit(&records, &spec_s()), Err(Error::EmptyInput)));
    }

    fn norm_s(mean: f64, std: f64) -> NormParams {
        let mut cols = BTreeMap::new();
        cols.insert("s".to_string(), ColumnStats { mean, std });
        cols.insert("y".to_string(), ColumnStats { mean: 0.0, std: 1.0 });
        NormParams::from_columns(cols).unwrap()
    }

    #[test]
    fn apply_centers_and_scales() {
        let x = Matrix::from_rows(&[[0.0], [10.0], [5.0]]).unwrap();
        let ds = CalDataset::new(x, vec![1.0, 2.0, 3.0], vec![1, 2, 3], spec_s()).unwrap();
        let n = normalize_apply(&ds, &norm_s(5.0, 5.0)).unwrap();
        assert_eq!(n.x.column(0), vec![-1.0, 1.0, 0.0]);
        assert!(n.is_normalized());
    }

    #[test]
    fn apply_requires_every_column() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [10.0, 2.0]]).unwrap();
        let ds = CalDataset::new(x, vec![1.0, 2.0], vec![1, 2], FeatureSpec::parse("s,t").unwrap()).unwrap();
        assert!(matches!(
            normalize_apply(&ds, &norm_s(5.0, 5.0)),
            Err(Error::MissingColumn(c)) if c == "t"
        ));
    }

    #[test]
    fn denormalize_inverts() {
        let norm = norm_s(5.0, 5.0);
        assert_eq!(denormalize(&[0.0], &norm, "s").unwrap(), vec![5.0]);
        assert_eq!(denormalize(&[1.0], &norm, "s").unwrap(), vec![10.0]);
        assert_eq!(denormalize(&[-1.0, 1.0], &norm, "s").unwrap(), vec![0.0, 10.0]);
        assert!(matches!(denormalize(&[1.0], &norm, "rh"), Err(Error::MissingColumn(_))));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let (a, b) = split_indices(100, 0.75, 7).unwrap();
        assert_eq!((a.len(), b.len()), (75, 25));
        assert_eq!(split_indices(100, 0.75, 7).unwrap(), (a, b));
        assert!(matches!(split_indices(3, 0.75, 1), Err(Error::TooFewRows { .. })));
        assert!(matches!(split_indices(10, 1.0, 1), Err(Error::InvalidFraction(_))));
    }

    #[test]
    fn split_varies_with_seed() {
        // Only C(8,6) = 28 partitions exist, so consecutive-seed pairs collide
        // with probability 1/28; over 100 pairs at least 95 must differ.
        let differing = (1..=100u64)
            .filter(|&s| split_indices(8, 0.75, s).unwrap() != split_indices(8, 0.75, s + 1).unwrap())
            .count();
        assert!(differing >= 95, "only {differing} of 100 seed pairs differ");
    }

    #[test]
    fn lag_shift_semantics() {
        let records: Vec<_> = [1.0, 2.0, 3.0]
            .iter()
            .enumerate()
            .map(|(i, &s)| rec(60 * (i as i64 + 1), s, 0.0, 50.0, 1.0))
            .collect();
        let ds = assemble_features(&records, &FeatureSpec::parse("s,s_lag1").unwrap()).unwrap();
        assert_eq!(ds.x.row(0), &[2.0, 1.0]);
        assert_eq!(ds.x.row(1), &[3.0, 2.0]);
        assert_eq!(ds.timestamps, vec![120, 180]);
    }

    #[test]
    fn phi_has_three_columns() {
        let records: Vec<_> = (1..=5).map(|i| rec(i * 60, i as f64, 30.0, 70.0, 2.0)).collect();
        let ds = assemble_features(&records, &FeatureSpec::phi()).unwrap();
        assert_eq!((ds.x.n_rows(), ds.x.n_cols()), (5, 3));
    }

    #[test]
    fn incomplete_rows_dropped() {
        let mut records: Vec<_> = (1..=4).map(|i| rec(i * 60, i as f64, 30.0, 70.0, 2.0)).collect();
        records[2].rh = None;
        let ds = assemble_features(&records, &FeatureSpec::parse("s,rh").unwrap()).unwrap();
        assert_eq!(ds.timestamps, vec![60, 120, 240]);
        // rh is not part of {s}, so the row survives there.
        assert_eq!(assemble_features(&records, &spec_s()).unwrap().n_rows(), 4);
    }

    #[test]
    fn inputs_ignore_missing_reference() {
        let mut records: Vec<_> = (1..=3).map(|i| rec(i * 60, i as f64, 30.0, 70.0, 2.0)).collect();
        for r in &mut records {
            r.y = None;
        }
        assert!(matches!(assemble_features(&records, &spec_s()), Err(Error::EmptyAfterDrop)));
        assert_eq!(assemble_inputs(&records, &spec_s()).unwrap().n_rows(), 3);
    }

    #[test]
    fn unsorted_and_off_grid_records_rejected() {
        let records = vec![rec(120, 1.0, 0.0, 50.0, 1.0), rec(60, 2.0, 0.0, 50.0, 1.0)];
        assert!(matches!(
            assemble_features(&records, &spec_s()),
            Err(Error::NonMonotonicTimestamps { index: 1 })
        ));
        let records = vec![
            rec(60, 1.0, 0.0, 50.0, 1.0),
            rec(120, 2.0, 0.0, 50.0, 1.0),
            rec(150, 2.0, 0.0, 50.0, 1.0),
            rec(200, 2.0, 0.0, 50.0, 1.0),
        ];
        assert!(matches!(
            assemble_features(&records, &FeatureSpec::parse("s,s_lag1").unwrap()),
            Err(Error::NotBucketed { .. })
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(FeatureSpec::parse("t,rh").is_err());
        assert!(FeatureSpec::parse("s,s").is_err());
        assert!(FeatureSpec::parse("").is_err());
        assert!(FeatureSpec::parse("s,pm10").is_err());
        let spec = FeatureSpec::parse("s, t ,rh,s_lag1").unwrap();
        assert_eq!(spec, FeatureSpec::phi_prime());
        assert_eq!(spec.label(), "s+t+rh+s_lag1");
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"["s","t","rh","s_lag1"]"#);
        assert_eq!(serde_json::from_str::<FeatureSpec>(&json).unwrap(), spec);
        assert_eq!(serde_json::from_str::<FeatureSpec>(r#""s,t,rh,s_lag1""#).unwrap(), spec);
        assert!(serde_json::from_str::<FeatureSpec>(r#""t,rh""#).is_err());
    }
}
