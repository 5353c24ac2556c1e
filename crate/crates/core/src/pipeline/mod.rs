//! Calibration models: single-phase baselines and the estimated-error
//! augmented two-phase model.
//!
//! Two-phase training runs, in order:
//!
//! 1. fit a linear model on `(X, y)` and predict `ŷ_f`;
//! 2. take the absolute errors `e_a = |ŷ_f − y|`;
//! 3. fit the loss estimator on `[X | ŷ_f]` against `e_a` and estimate `ê`;
//! 4. fit a forest on `[X | ê]` against `y`.
//!
//! Prediction repeats steps 1, 3 and 4 without touching reference values.

mod sweep;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use sweep::{
    feature_sweep, DataIdentity, EvalReport, MetricSpace, MetricSummary, ReportRow, RunRecord, StoredPredictions,
    SweepConfig, USEPA_MIN_R2,
};

use crate::dataset::{split_indices, CalDataset, FeatureMatrix, FeatureSpec, NormParams};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nanny::{absolute_errors, nanny_fit, NannyConfig, NannyModel};
use crate::regress::{forest_fit, mlr_fit, ForestModel, ForestParams, LinearModel};
use crate::seed::derive_seed;

/// Container tag written into every serialized model.
pub const MODEL_FORMAT: &str = "eeatc-model";
pub const MODEL_VERSION: u32 = 1;

const NANNY_STREAM: u64 = 0x006e_616e_6e79;
const HOLDOUT_STREAM: u64 = 0x686f_6c64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlr,
    Rf,
    Eeatc,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Mlr, ModelKind::Rf, ModelKind::Eeatc];
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Mlr => "MLR",
            ModelKind::Rf => "RF",
            ModelKind::Eeatc => "EEATC",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mlr" => Ok(ModelKind::Mlr),
            "rf" => Ok(ModelKind::Rf),
            "eeatc" => Ok(ModelKind::Eeatc),
            other => Err(Error::BadConfig(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Training options shared by every model kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Single-phase forest and second-phase forest.
    pub forest: ForestParams,
    pub nanny: NannyConfig,
    /// When set, this fraction of the training rows is held out from the
    /// first phase and used alone to fit the loss estimator.
    pub nanny_holdout: Option<f64>,
    /// Absolute errors below this are treated as exact zeros.
    pub residual_floor: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            forest: ForestParams::default(),
            nanny: NannyConfig::default(),
            nanny_holdout: None,
            residual_floor: 1e-9,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Sets the worker-thread count on every forest.
    pub fn with_threads(mut self, n: Option<usize>) -> Self {
        self.forest.n_threads = n;
        self.nanny.forest.n_threads = n;
        self
    }
}

/// Fitted two-phase model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EeatcModel {
    pub phase1: LinearModel,
    pub nanny: NannyModel,
    pub phase2: ForestModel,
    pub spec: FeatureSpec,
    /// Statistics the training data was normalized with; `None` for models
    /// trained in raw units.
    pub norm: Option<NormParams>,
}

/// Intermediate vectors from one two-phase training run.
#[derive(Debug, Clone, PartialEq)]
pub struct EeatcTrace {
    pub y_hat_f: Vec<f64>,
    pub e_a: Vec<f64>,
    pub e_hat: Vec<f64>,
    pub y_hat: Vec<f64>,
}

pub fn eeatc_train(train: &CalDataset, cfg: &TrainConfig) -> Result<EeatcModel> {
    eeatc_train_traced(train, cfg).map(|(m, _)| m)
}

pub fn eeatc_train_traced(train: &CalDataset, cfg: &TrainConfig) -> Result<(EeatcModel, EeatcTrace)> {
    if train.n_rows() == 0 {
        return Err(Error::EmptyInput);
    }
    let x = &train.x;
    let y = &train.y;
    let nanny_seed = derive_seed(cfg.seed, NANNY_STREAM);

    let (phase1, nanny) = match cfg.nanny_holdout {
        None => {
            let phase1 = mlr_fit(x, y)?;
            let y_hat_f = phase1.predict(x)?;
            let e_a = floored_errors(y, &y_hat_f, cfg.residual_floor)?;
            let nanny = nanny_fit(x, &y_hat_f, &e_a, &cfg.nanny, nanny_seed)?;
            (phase1, nanny)
        }
        Some(frac) => {
            let (fit_rows, held_rows) = split_indices(train.n_rows(), 1.0 - frac, derive_seed(cfg.seed, HOLDOUT_STREAM))?;
            let fit_part = train.select_rows(&fit_rows);
            let held = train.select_rows(&held_rows);
            let phase1 = mlr_fit(&fit_part.x, &fit_part.y)?;
            let held_hat = phase1.predict(&held.x)?;
            let e_a = floored_errors(&held.y, &held_hat, cfg.residual_floor)?;
            let nanny = nanny_fit(&held.x, &held_hat, &e_a, &cfg.nanny, nanny_seed)?;
            (phase1, nanny)
        }
    };

    let y_hat_f = phase1.predict(x)?;
    let e_a = floored_errors(y, &y_hat_f, cfg.residual_floor)?;
    let e_hat = nanny.estimate(x, &y_hat_f)?;
    let phase2 = forest_fit(&x.with_column(&e_hat)?, y, &cfg.forest, cfg.seed)?;
    let y_hat = phase2.predict(&x.with_column(&e_hat)?)?;

    let model = EeatcModel {
        phase1,
        nanny,
        phase2,
        spec: train.spec.clone(),
        norm: train.norm.clone(),
    };
    Ok((
        model,
        EeatcTrace {
            y_hat_f,
            e_a,
            e_hat,
            y_hat,
        },
    ))
}

fn floored_errors(y: &[f64], y_hat_f: &[f64], floor: f64) -> Result<Vec<f64>> {
    let mut e = absolute_errors(y, y_hat_f)?;
    for v in &mut e {
        if *v < floor {
            *v = 0.0;
        }
    }
    Ok(e)
}

/// Calibrated values for `features`, in the model's target space.
pub fn eeatc_predict(model: &EeatcModel, features: &FeatureMatrix) -> Result<Vec<f64>> {
    eeatc_predict_traced(model, features).map(|(y, _)| y)
}

/// Returns `(ŷ, ê)`.
pub fn eeatc_predict_traced(model: &EeatcModel, features: &FeatureMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let x = model_inputs(features, &model.spec, model.norm.as_ref())?;
    let y_hat_f = model.phase1.predict(&x)?;
    let e_hat = model.nanny.estimate(&x, &y_hat_f)?;
    let y_hat = model.phase2.predict(&x.with_column(&e_hat)?)?;
    Ok((y_hat, e_hat))
}

impl EeatcModel {
    pub fn predict(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        eeatc_predict(self, features)
    }
}

/// Brings features into the space the model was trained in.
fn model_inputs(features: &FeatureMatrix, spec: &FeatureSpec, norm: Option<&NormParams>) -> Result<Matrix> {
    if &features.spec != spec {
        return Err(Error::BadConfig(format!(
            "model expects features [{spec}], got [{}]",
            features.spec
        )));
    }
    match (norm, features.normalized) {
        (Some(n), false) => Ok(features.normalize(n)?.x),
        (Some(_), true) | (None, false) => Ok(features.x.clone()),
        (None, true) => Err(Error::BadConfig("raw-unit model given normalized features".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "lowercase")]
pub enum SinglePhase {
    Mlr(LinearModel),
    Rf(ForestModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinglePhaseModel {
    pub model: SinglePhase,
    pub spec: FeatureSpec,
    pub norm: Option<NormParams>,
}

impl SinglePhaseModel {
    pub fn predict(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        let x = model_inputs(features, &self.spec, self.norm.as_ref())?;
        match &self.model {
            SinglePhase::Mlr(m) => m.predict(&x),
            SinglePhase::Rf(m) => m.predict(&x),
        }
    }
}

/// One direct fit of `kind` (MLR or RF) on `(X, y)`.
pub fn single_phase_train(train: &CalDataset, kind: ModelKind, cfg: &TrainConfig) -> Result<SinglePhaseModel> {
    if train.n_rows() == 0 {
        return Err(Error::EmptyInput);
    }
    let model = match kind {
        ModelKind::Mlr => SinglePhase::Mlr(mlr_fit(&train.x, &train.y)?),
        ModelKind::Rf => SinglePhase::Rf(forest_fit(&train.x, &train.y, &cfg.forest, cfg.seed)?),
        ModelKind::Eeatc => {
            return Err(Error::BadConfig("EEATC is not a single-phase model".into()));
        }
    };
    Ok(SinglePhaseModel {
        model,
        spec: train.spec.clone(),
        norm: train.norm.clone(),
    })
}

/// Any fitted calibration model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pipeline", rename_all = "snake_case")]
pub enum CalibrationModel {
    SinglePhase(SinglePhaseModel),
    Eeatc(EeatcModel),
}

impl CalibrationModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            CalibrationModel::SinglePhase(m) => match m.model {
                SinglePhase::Mlr(_) => ModelKind::Mlr,
                SinglePhase::Rf(_) => ModelKind::Rf,
            },
            CalibrationModel::Eeatc(_) => ModelKind::Eeatc,
        }
    }

    pub fn spec(&self) -> &FeatureSpec {
        match self {
            CalibrationModel::SinglePhase(m) => &m.spec,
            CalibrationModel::Eeatc(m) => &m.spec,
        }
    }

    pub fn norm(&self) -> Option<&NormParams> {
        match self {
            CalibrationModel::SinglePhase(m) => m.norm.as_ref(),
            CalibrationModel::Eeatc(m) => m.norm.as_ref(),
        }
    }

    /// Predictions in the model's target space (normalized when the model
    /// carries normalization statistics).
    pub fn predict(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        match self {
            CalibrationModel::SinglePhase(m) => m.predict(features),
            CalibrationModel::Eeatc(m) => m.predict(features),
        }
    }

    /// Predictions mapped back to reference units.
    pub fn predict_raw(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        let p = self.predict(features)?;
        match self.norm() {
            Some(n) => crate::dataset::denormalize(&p, n, crate::dataset::TARGET),
            None => Ok(p),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFileRef {
            format: MODEL_FORMAT,
            version: MODEL_VERSION,
            model: self,
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::UnsupportedFormat {
                format: file.format,
                version: file.version,
            });
        }
        Ok(file.model)
    }
}

#[derive(Serialize)]
struct ModelFileRef<'a> {
    format: &'a str,
    version: u32,
    model: &'a CalibrationModel,
}

#[derive(Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: CalibrationModel,
}

/// Trains any model kind.
pub fn train_model(train: &CalDataset, kind: ModelKind, cfg: &TrainConfig) -> Result<CalibrationModel> {
    match kind {
        ModelKind::Eeatc => Ok(CalibrationModel::Eeatc(eeatc_train(train, cfg)?)),
        _ => Ok(CalibrationModel::SinglePhase(single_phase_train(train, kind, cfg)?)),
    }
}
