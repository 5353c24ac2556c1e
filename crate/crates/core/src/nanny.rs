//! Direct loss estimation: a secondary model trained on the absolute errors
//! of the first-phase calibration, used to estimate those errors where no
//! reference observation exists.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::regress::{forest_fit, mlr_fit, ForestModel, ForestParams, LinearModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackboneKind {
    #[default]
    Forest,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NannyConfig {
    pub backbone: BackboneKind,
    pub forest: ForestParams,
}

impl Default for NannyConfig {
    fn default() -> Self {
        Self {
            backbone: BackboneKind::Forest,
            forest: ForestParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Backbone {
    Forest(ForestModel),
    Linear(LinearModel),
}

/// Fitted loss estimator. Its inputs are the calibration features followed
/// by the first-phase prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NannyModel {
    pub backbone: Backbone,
    /// Number of calibration features, excluding the prediction column.
    pub n_features: usize,
}

fn augment(x: &Matrix, y_hat_f: &[f64]) -> Result<Matrix> {
    x.with_column(y_hat_f)
}

/// Fits the backbone on `[X | ŷ_f]` against `e_a = |y − ŷ_f|`.
pub fn nanny_fit(x: &Matrix, y_hat_f: &[f64], e_a: &[f64], cfg: &NannyConfig, seed: u64) -> Result<NannyModel> {
    if e_a.len() != x.n_rows() {
        return Err(Error::ShapeMismatch {
            expected: x.n_rows(),
            got: e_a.len(),
        });
    }
    if let Some((index, &value)) = e_a.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NegativeTargets { index, value });
    }
    let aug = augment(x, y_hat_f)?;
    let backbone = match cfg.backbone {
        BackboneKind::Forest => Backbone::Forest(forest_fit(&aug, e_a, &cfg.forest, seed)?),
        BackboneKind::Linear => Backbone::Linear(mlr_fit(&aug, e_a)?),
    };
    Ok(NannyModel {
        backbone,
        n_features: x.n_cols(),
    })
}

/// Estimated absolute first-phase error per row, clamped at zero.
pub fn nanny_estimate(model: &NannyModel, x: &Matrix, y_hat_f: &[f64]) -> Result<Vec<f64>> {
    if x.n_cols() != model.n_features {
        return Err(Error::ShapeMismatch {
            expected: model.n_features,
            got: x.n_cols(),
        });
    }
    let aug = augment(x, y_hat_f)?;
    let raw = match &model.backbone {
        Backbone::Forest(f) => f.predict(&aug)?,
        Backbone::Linear(l) => l.predict(&aug)?,
    };
    Ok(raw.into_iter().map(|v| v.max(0.0)).collect())
}

impl NannyModel {
    pub fn estimate(&self, x: &Matrix, y_hat_f: &[f64]) -> Result<Vec<f64>> {
        nanny_estimate(self, x, y_hat_f)
    }
}

/// Mean of the estimated errors: the reference-free MAE estimate.
pub fn estimated_mae(e_hat: &[f64]) -> Result<f64> {
    if e_hat.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(e_hat.iter().sum::<f64>() / e_hat.len() as f64)
}

/// Absolute errors `|y − ŷ_f|`.
pub fn absolute_errors(y: &[f64], y_hat_f: &[f64]) -> Result<Vec<f64>> {
    if y.len() != y_hat_f.len() {
        return Err(Error::ShapeMismatch {
            expected: y.len(),
            got: y_hat_f.len(),
        });
    }
    Ok(y.iter().zip(y_hat_f).map(|(a, b)| (a - b).abs()).collect())
}
