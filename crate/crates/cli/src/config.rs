//! Run configuration.
//!
//! Values resolve in this order, later sources winning:
//! built-in defaults, the `--config` TOML file, command-line flags. The seed
//! additionally falls back to `EEATC_SEED` when neither the file nor a flag
//! sets it.

use std::path::{Path, PathBuf};

use eeatc::dataset::{FeatureSpec, NormalizeScope};
use eeatc::ingest::{CleaningConfig, ColumnMapping};
use eeatc::nanny::NannyConfig;
use eeatc::pipeline::{MetricSpace, ModelKind, SweepConfig, TrainConfig};
use eeatc::regress::ForestParams;
use eeatc::synth::Scenario;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "EEATC_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Vec<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    /// Feature subsets compared by `sweep`.
    pub features: Vec<FeatureSpec>,
    /// Features of the model fitted by `train`.
    pub train_features: FeatureSpec,
    pub models: Vec<ModelKind>,
    pub repetitions: usize,
    pub train_fraction: f64,
    pub normalize_scope: NormalizeScope,
    pub metric_space: MetricSpace,
    pub keep_predictions: bool,
    pub nanny_holdout: Option<f64>,
    pub forest: ForestParams,
    pub nanny: NannyConfig,
    pub mapping: ColumnMapping,
    pub cleaning: CleaningConfig,
    pub synth: SynthSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub scenario: Scenario,
    pub n: usize,
    pub resolution: i64,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            scenario: Scenario::Mobile,
            n: 5000,
            resolution: 60,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: Vec::new(),
            out_dir: PathBuf::from("eeatc-out"),
            seed: None,
            threads: None,
            features: FeatureSpec::standard_subsets(),
            train_features: FeatureSpec::phi(),
            models: ModelKind::ALL.to_vec(),
            repetitions: 5,
            train_fraction: 0.75,
            normalize_scope: NormalizeScope::TrainOnly,
            metric_space: MetricSpace::Normalized,
            keep_predictions: false,
            nanny_holdout: None,
            forest: ForestParams::default(),
            nanny: NannyConfig::default(),
            mapping: ColumnMapping::canonical(),
            cleaning: CleaningConfig::default(),
            synth: SynthSection::default(),
        }
    }
}

/// Where the resolved seed came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedSource {
    Flag,
    Config,
    Env,
    Default,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Fixes the seed so the snapshot reproduces the run.
    pub fn resolve_seed(&mut self, flag: Option<u64>) -> CliResult<SeedSource> {
        let (seed, source) = if let Some(s) = flag {
            (s, SeedSource::Flag)
        } else if let Some(s) = self.seed {
            (s, SeedSource::Config)
        } else if let Ok(v) = std::env::var(SEED_ENV) {
            let s = v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{SEED_ENV}=`{v}` is not an unsigned integer")))?;
            (s, SeedSource::Env)
        } else {
            (0, SeedSource::Default)
        };
        self.seed = Some(seed);
        Ok(source)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            forest: self.forest.clone(),
            nanny: self.nanny.clone(),
            nanny_holdout: self.nanny_holdout,
            seed: self.seed(),
            ..TrainConfig::default()
        }
        .with_threads(self.threads)
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            kinds: self.models.clone(),
            subsets: self.features.clone(),
            repetitions: self.repetitions,
            seed: self.seed(),
            train_fraction: self.train_fraction,
            normalize_scope: self.normalize_scope,
            metric_space: self.metric_space,
            train: self.train_config().with_threads(None),
            keep_predictions: self.keep_predictions,
        }
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Usage(format!("cannot serialize config: {e}")))
    }
}
