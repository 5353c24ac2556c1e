//! Feature-subset sweeps over repeated seeded splits.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train_model, ModelKind, TrainConfig};
use crate::dataset::{
    assemble_features, denormalize, split_and_normalize, FeatureSpec, NormParams, NormalizeScope, SampleRecord,
    TARGET,
};
use crate::error::{Error, Result};
use crate::metrics::MetricPair;
use crate::seed::derive_seed;

/// Minimum test R² the USEPA guidance asks of sensors used for indication.
pub const USEPA_MIN_R2: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricSpace {
    #[default]
    Normalized,
    Raw,
}

impl FromStr for MetricSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized" => Ok(Self::Normalized),
            "raw" => Ok(Self::Raw),
            other => Err(Error::BadConfig(format!("unknown metric space `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub kinds: Vec<ModelKind>,
    pub subsets: Vec<FeatureSpec>,
    /// Number of seeded train/test splits per cell.
    pub repetitions: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub normalize_scope: NormalizeScope,
    pub metric_space: MetricSpace,
    /// Model options; `train.seed` is replaced by each repetition's seed.
    pub train: TrainConfig,
    pub keep_predictions: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            kinds: ModelKind::ALL.to_vec(),
            subsets: FeatureSpec::standard_subsets(),
            repetitions: 5,
            seed: 0,
            train_fraction: 0.75,
            normalize_scope: NormalizeScope::TrainOnly,
            metric_space: MetricSpace::Normalized,
            train: TrainConfig::default(),
            keep_predictions: false,
        }
    }
}

impl SweepConfig {
    /// Seed of repetition `rep`; shared by the split and every model fit.
    pub fn repetition_seed(&self, rep: usize) -> u64 {
        derive_seed(self.seed, rep as u64)
    }
}

/// Identifies the records a report was computed from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataIdentity {
    pub name: String,
    pub n_records: usize,
    /// FNV-1a digest over every record field.
    pub fingerprint: String,
}

impl DataIdentity {
    pub fn of(name: &str, records: &[SampleRecord]) -> Self {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let mut eat = |bytes: &[u8]| {
            for b in bytes {
                h ^= *b as u64;
                h = h.wrapping_mul(PRIME);
            }
        };
        for r in records {
            eat(&r.timestamp.to_le_bytes());
            for v in [r.s, r.t, r.rh, r.y, r.lat, r.lon, r.speed] {
                match v {
                    Some(v) => eat(&v.to_bits().to_le_bytes()),
                    None => eat(&[0xff]),
                }
            }
        }
        Self {
            name: name.to_string(),
            n_records: records.len(),
            fingerprint: format!("{h:016x}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredPredictions {
    pub train_y: Vec<f64>,
    pub train_pred: Vec<f64>,
    pub test_y: Vec<f64>,
    pub test_pred: Vec<f64>,
}

/// Metrics from one split of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub train: MetricPair,
    pub test: MetricPair,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictions: Option<StoredPredictions>,
}

/// Mean and sample standard deviation over repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub r2: f64,
    pub r2_std: f64,
    pub rmse: f64,
    pub rmse_std: f64,
}

impl MetricSummary {
    fn of(pairs: &[MetricPair]) -> Self {
        let (r2, r2_std) = mean_std(pairs.iter().map(|p| p.r2));
        let (rmse, rmse_std) = mean_std(pairs.iter().map(|p| p.rmse));
        Self {
            r2,
            r2_std,
            rmse,
            rmse_std,
        }
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// One (model kind, feature subset) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub kind: ModelKind,
    pub subset: FeatureSpec,
    pub train: MetricSummary,
    pub test: MetricSummary,
    /// Best subset for this model kind.
    pub best: bool,
    /// Mean test R² reaches [`USEPA_MIN_R2`].
    pub meets_usepa: bool,
    pub runs: Vec<RunRecord>,
}

impl ReportRow {
    pub fn from_runs(kind: ModelKind, subset: FeatureSpec, runs: Vec<RunRecord>) -> Self {
        let train: Vec<MetricPair> = runs.iter().map(|r| r.train).collect();
        let test: Vec<MetricPair> = runs.iter().map(|r| r.test).collect();
        Self {
            kind,
            subset,
            train: MetricSummary::of(&train),
            test: MetricSummary::of(&test),
            best: false,
            meets_usepa: false,
            runs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub data: DataIdentity,
    pub seeds: Vec<u64>,
    pub config: SweepConfig,
    pub rows: Vec<ReportRow>,
}

impl EvalReport {
    /// Recomputes the best-subset and USEPA flags. Per model kind the best
    /// subset has the highest mean test R²; ties go to the lower test RMSE.
    pub fn mark(&mut self) {
        for row in &mut self.rows {
            row.best = false;
            row.meets_usepa = row.test.r2 >= USEPA_MIN_R2;
        }
        let mut kinds: Vec<ModelKind> = self.rows.iter().map(|r| r.kind).collect();
        kinds.sort();
        kinds.dedup();
        for kind in kinds {
            let mut best: Option<usize> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row.kind != kind {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some(b) => {
                        let cur = &self.rows[b].test;
                        row.test.r2 > cur.r2 || (row.test.r2 == cur.r2 && row.test.rmse < cur.rmse)
                    }
                };
                if better {
                    best = Some(i);
                }
            }
            if let Some(b) = best {
                self.rows[b].best = true;
            }
        }
    }

    pub fn row(&self, kind: ModelKind, subset: &FeatureSpec) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.kind == kind && &r.subset == subset)
    }

    pub fn best_subset(&self, kind: ModelKind) -> Option<&FeatureSpec> {
        self.rows.iter().find(|r| r.kind == kind && r.best).map(|r| &r.subset)
    }

    /// Rows whose mean test R² meets the USEPA threshold.
    pub fn usepa_rows(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.meets_usepa)
    }
}

struct Cell {
    subset: usize,
    rep: usize,
}

/// Fits every model kind on every subset over `cfg.repetitions` seeded
/// splits. Within a repetition all kinds share the split.
pub fn feature_sweep(records: &[SampleRecord], cfg: &SweepConfig, name: &str) -> Result<EvalReport> {
    if cfg.kinds.is_empty() || cfg.subsets.is_empty() || cfg.repetitions == 0 {
        return Err(Error::BadConfig("sweep needs at least one kind, subset and repetition".into()));
    }
    let raws = cfg
        .subsets
        .iter()
        .map(|s| assemble_features(records, s))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<Cell> = (0..cfg.subsets.len())
        .flat_map(|subset| (0..cfg.repetitions).map(move |rep| Cell { subset, rep }))
        .collect();

    let results = cells
        .par_iter()
        .map(|cell| -> Result<Vec<RunRecord>> {
            let seed = cfg.repetition_seed(cell.rep);
            let (train, test, norm) =
                split_and_normalize(&raws[cell.subset], cfg.train_fraction, seed, cfg.normalize_scope)?;
            let mut tc = cfg.train.clone();
            tc.seed = seed;
            cfg.kinds
                .iter()
                .map(|&kind| {
                    let model = train_model(&train, kind, &tc)?;
                    let train_pred = model.predict(&train.features())?;
                    let test_pred = model.predict(&test.features())?;
                    evaluate_run(seed, &train.y, train_pred, &test.y, test_pred, &norm, cfg)
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (k_idx, &kind) in cfg.kinds.iter().enumerate() {
        for (s_idx, subset) in cfg.subsets.iter().enumerate() {
            let runs = (0..cfg.repetitions)
                .map(|rep| results[s_idx * cfg.repetitions + rep][k_idx].clone())
                .collect();
            rows.push(ReportRow::from_runs(kind, subset.clone(), runs));
        }
    }
    let mut report = EvalReport {
        data: DataIdentity::of(name, records),
        seeds: (0..cfg.repetitions).map(|r| cfg.repetition_seed(r)).collect(),
        config: cfg.clone(),
        rows,
    };
    report.mark();
    Ok(report)
}

fn evaluate_run(
    seed: u64,
    train_y: &[f64],
    train_pred: Vec<f64>,
    test_y: &[f64],
    test_pred: Vec<f64>,
    norm: &NormParams,
    cfg: &SweepConfig,
) -> Result<RunRecord> {
    let to_space = |v: &[f64]| -> Result<Vec<f64>> {
        match cfg.metric_space {
            MetricSpace::Normalized => Ok(v.to_vec()),
            MetricSpace::Raw => denormalize(v, norm, TARGET),
        }
    };
    let (ty, tp, vy, vp) = (
        to_space(train_y)?,
        to_space(&train_pred)?,
        to_space(test_y)?,
        to_space(&test_pred)?,
    );
    Ok(RunRecord {
        seed,
        train: MetricPair::compute(&tp, &ty)?,
        test: MetricPair::compute(&vp, &vy)?,
        predictions: cfg.keep_predictions.then(|| StoredPredictions {
            train_y: ty,
            train_pred: tp,
            test_y: vy,
            test_pred: vp,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(r2: f64, rmse: f64) -> MetricSummary {
        MetricSummary {
            r2,
            r2_std: 0.0,
            rmse,
            rmse_std: 0.0,
        }
    }

    fn row(kind: ModelKind, subset: &str, r2: f64, rmse: f64) -> ReportRow {
        ReportRow {
            kind,
            subset: FeatureSpec::parse(subset).unwrap(),
            train: summary(r2, rmse),
            test: summary(r2, rmse),
            best: false,
            meets_usepa: false,
            runs: Vec::new(),
        }
    }

    fn report(rows: Vec<ReportRow>) -> EvalReport {
        let mut r = EvalReport {
            data: DataIdentity::of("t", &[]),
            seeds: vec![],
            config: SweepConfig::default(),
            rows,
        };
        r.mark();
        r
    }

    #[test]
    fn star_goes_to_highest_test_r2_then_lowest_rmse() {
        let r = report(vec![
            row(ModelKind::Rf, "s", 0.5, 0.6),
            row(ModelKind::Rf, "s,t,rh", 0.7, 0.5),
            row(ModelKind::Mlr, "s", 0.4, 0.7),
            row(ModelKind::Mlr, "s,t", 0.4, 0.65),
        ]);
        assert_eq!(r.best_subset(ModelKind::Rf).unwrap().label(), "s+t+rh");
        assert_eq!(r.best_subset(ModelKind::Mlr).unwrap().label(), "s+t");
        assert_eq!(r.rows.iter().filter(|r| r.best).count(), 2);
    }

    #[test]
    fn usepa_flag_straddles_threshold() {
        let r = report(vec![
            row(ModelKind::Eeatc, "s", 0.7999999, 0.4),
            row(ModelKind::Eeatc, "s,t", 0.8, 0.4),
            row(ModelKind::Eeatc, "s,t,rh", 0.82, 0.37),
        ]);
        let flags: Vec<bool> = r.rows.iter().map(|r| r.meets_usepa).collect();
        assert_eq!(flags, vec![false, true, true]);
        assert_eq!(r.usepa_rows().count(), 2);
    }

    #[test]
    fn fingerprint_tracks_content() {
        let mut recs = vec![SampleRecord::new(60), SampleRecord::new(120)];
        let a = DataIdentity::of("x", &recs);
        recs[1].s = Some(1.0);
        let b = DataIdentity::of("x", &recs);
        assert_ne!(a.fingerprint, b.fingerprint);
        assert_eq!(a.n_records, 2);
    }
}
