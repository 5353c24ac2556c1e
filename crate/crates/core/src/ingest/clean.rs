use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{Field, SampleRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub min: f64,
    pub max: f64,
}

impl Bound {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeploymentMode {
    /// Vehicle-mounted sensor; start/stop segments are removed.
    #[default]
    Mobile,
    /// Fixed site; motion filtering is a no-op.
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleaningConfig {
    /// Physical range per field, in canonical units.
    pub bounds: BTreeMap<Field, Bound>,
    /// Fields screened by the robust z-score pass.
    pub robust_fields: Vec<Field>,
    /// Robust z-score threshold.
    pub k: f64,
    pub bucket_width: i64,
    /// Speeds below this (km/h) count as stationary.
    pub speed_threshold: f64,
    /// Shortest run of stationary records that is removed.
    pub stationary_run_length: usize,
    pub mode: DeploymentMode,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        let bounds = [
            (Field::S, Bound::new(0.0, 1000.0)),
            (Field::Y, Bound::new(0.0, 1000.0)),
            (Field::Rh, Bound::new(0.0, 100.0)),
            (Field::T, Bound::new(-40.0, 60.0)),
        ]
        .into_iter()
        .collect();
        Self {
            bounds,
            robust_fields: vec![Field::S, Field::T, Field::Rh, Field::Y],
            k: 4.0,
            bucket_width: 60,
            speed_threshold: 1.0,
            stationary_run_length: 1,
            mode: DeploymentMode::Mobile,
        }
    }
}

impl CleaningConfig {
    pub fn validate(&self) -> Result<()> {
        for (f, b) in &self.bounds {
            if !(b.min < b.max) {
                return Err(Error::BadConfig(format!("bound for `{}` needs min < max", f.name())));
            }
        }
        if !(self.k > 0.0) {
            return Err(Error::BadConfig("k must be positive".into()));
        }
        if self.bucket_width <= 0 {
            return Err(Error::BadConfig("bucket width must be positive".into()));
        }
        if !(self.speed_threshold >= 0.0) {
            return Err(Error::BadConfig("speed threshold must be non-negative".into()));
        }
        if self.stationary_run_length == 0 {
            return Err(Error::BadConfig("stationary run length must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_monotonic(records: &[SampleRecord]) -> Result<()> {
    match records.windows(2).position(|w| w[1].timestamp < w[0].timestamp) {
        Some(i) => Err(Error::NonMonotonicTimestamps { index: i + 1 }),
        None => Ok(()),
    }
}

/// Averages records into `width`-second buckets labelled by their start
/// time. Each field is averaged over the records where it is present.
pub fn bucket_average(records: &[SampleRecord], width: i64) -> Result<Vec<SampleRecord>> {
    if width <= 0 {
        return Err(Error::BadConfig("bucket width must be positive".into()));
    }
    check_monotonic(records)?;
    let mut out = Vec::new();
    let mut i = 0;
    while i < records.len() {
        let start = records[i].timestamp.div_euclid(width) * width;
        let mut sums = [0.0f64; 7];
        let mut counts = [0usize; 7];
        while i < records.len() && records[i].timestamp.div_euclid(width) * width == start {
            for (k, f) in Field::ALL.into_iter().enumerate() {
                if let Some(v) = records[i].get(f) {
                    sums[k] += v;
                    counts[k] += 1;
                }
            }
            i += 1;
        }
        let mut rec = SampleRecord::new(start);
        for (k, f) in Field::ALL.into_iter().enumerate() {
            if counts[k] > 0 {
                rec.set(f, Some(sums[k] / counts[k] as f64));
            }
        }
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub input: usize,
    /// Records outside a physical bound, by field.
    pub range_dropped: BTreeMap<Field, usize>,
    /// Records beyond the robust z-score threshold, by field.
    pub robust_dropped: BTreeMap<Field, usize>,
    pub output: usize,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Center and scale of the robust z-score, or `None` when the field has no
/// spread. The scale is 1.4826·MAD; when the MAD is zero it falls back to
/// 1.2533·(mean absolute deviation from the median).
fn robust_scale(values: &mut [f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let med = median(values);
    let mut dev: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    let mad = median(&dev);
    let scale = if mad > 0.0 {
        1.4826 * mad
    } else {
        1.253_314 * dev.iter().sum::<f64>() / dev.len() as f64
    };
    (scale > 0.0).then_some((med, scale))
}

/// Range screening followed by a robust z-score pass. The output is a
/// subsequence of the input.
pub fn filter_outliers(records: &[SampleRecord], cfg: &CleaningConfig) -> (Vec<SampleRecord>, OutlierReport) {
    let mut report = OutlierReport {
        input: records.len(),
        ..Default::default()
    };
    let in_range: Vec<SampleRecord> = records
        .iter()
        .filter(|r| {
            let bad = cfg
                .bounds
                .iter()
                .find(|(f, b)| r.get(**f).is_some_and(|v| !b.contains(v)));
            if let Some((f, _)) = bad {
                *report.range_dropped.entry(*f).or_default() += 1;
            }
            bad.is_none()
        })
        .copied()
        .collect();

    let stats: Vec<(Field, f64, f64)> = cfg
        .robust_fields
        .iter()
        .filter_map(|&f| {
            let mut vals: Vec<f64> = in_range.iter().filter_map(|r| r.get(f)).collect();
            robust_scale(&mut vals).map(|(m, s)| (f, m, s))
        })
        .collect();
    let out: Vec<SampleRecord> = in_range
        .into_iter()
        .filter(|r| {
            let bad = stats
                .iter()
                .find(|(f, med, scale)| r.get(*f).is_some_and(|v| (v - med).abs() / scale > cfg.k));
            if let Some((f, _, _)) = bad {
                *report.robust_dropped.entry(*f).or_default() += 1;
            }
            bad.is_none()
        })
        .collect();
    report.output = out.len();
    (out, report)
}

/// Great-circle distance in km.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    const R: f64 = 6371.0088;
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * R * a.sqrt().min(1.0).asin()
}

fn gps_speed(a: &SampleRecord, b: &SampleRecord) -> Option<f64> {
    let dt = (b.timestamp - a.timestamp) as f64;
    if dt <= 0.0 {
        return None;
    }
    let d = haversine_km(a.lat?, a.lon?, b.lat?, b.lon?);
    Some(d / (dt / 3600.0))
}

/// Speed per record: the speed column when present, otherwise derived from
/// the previous GPS fix (the next one for the first fix).
fn speeds(records: &[SampleRecord]) -> (Vec<Option<f64>>, bool) {
    let fixes: Vec<usize> = (0..records.len())
        .filter(|&i| records[i].lat.is_some() && records[i].lon.is_some())
        .collect();
    let mut derived = false;
    let mut out = vec![None; records.len()];
    let mut prev_fix: Option<usize> = None;
    let mut next = 0;
    for (i, r) in records.iter().enumerate() {
        while next < fixes.len() && fixes[next] <= i {
            next += 1;
        }
        out[i] = match r.speed {
            Some(v) => Some(v),
            None if r.lat.is_some() && r.lon.is_some() => {
                let s = match prev_fix {
                    Some(p) => gps_speed(&records[p], r),
                    None => fixes.get(next).and_then(|&n| gps_speed(r, &records[n])),
                };
                derived |= s.is_some();
                s
            }
            None => None,
        };
        if r.lat.is_some() && r.lon.is_some() {
            prev_fix = Some(i);
        }
    }
    (out, derived)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StationaryReport {
    pub input: usize,
    pub stationary_dropped: usize,
    pub transient_dropped: usize,
    pub speed_derived_from_gps: bool,
    pub output: usize,
}

/// Drops runs of records slower than the threshold together with the one
/// record that follows each run.
pub fn remove_stationary_segments(
    records: &[SampleRecord],
    cfg: &CleaningConfig,
) -> Result<(Vec<SampleRecord>, StationaryReport)> {
    let mut report = StationaryReport {
        input: records.len(),
        output: records.len(),
        ..Default::default()
    };
    if cfg.mode == DeploymentMode::Stationary || records.is_empty() {
        return Ok((records.to_vec(), report));
    }
    let (speed, derived) = speeds(records);
    if speed.iter().all(Option::is_none) {
        return Err(Error::NoMotionData);
    }
    report.speed_derived_from_gps = derived;
    let slow = |i: usize| speed[i].is_some_and(|v| v < cfg.speed_threshold);
    let mut keep = vec![true; records.len()];
    let mut i = 0;
    while i < records.len() {
        if !slow(i) {
            i += 1;
            continue;
        }
        let start = i;
        while i < records.len() && slow(i) {
            i += 1;
        }
        if i - start >= cfg.stationary_run_length {
            keep[start..i].iter_mut().for_each(|k| *k = false);
            report.stationary_dropped += i - start;
            if i < records.len() {
                keep[i] = false;
                report.transient_dropped += 1;
                i += 1;
            }
        }
    }
    let out: Vec<SampleRecord> = records.iter().zip(&keep).filter(|(_, k)| **k).map(|(r, _)| *r).collect();
    report.output = out.len();
    Ok((out, report))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub input: usize,
    pub bucketed: usize,
    pub stationary: StationaryReport,
    pub outliers: OutlierReport,
    pub output: usize,
}

/// Bucket averaging, start/stop removal, then outlier screening.
pub fn clean_records(records: &[SampleRecord], cfg: &CleaningConfig) -> Result<(Vec<SampleRecord>, CleaningReport)> {
    cfg.validate()?;
    let bucketed = bucket_average(records, cfg.bucket_width)?;
    let (moving, stationary) = remove_stationary_segments(&bucketed, cfg)?;
    let (out, outliers) = filter_outliers(&moving, cfg);
    let report = CleaningReport {
        input: records.len(),
        bucketed: bucketed.len(),
        stationary,
        outliers,
        output: out.len(),
    };
    Ok((out, report))
}
