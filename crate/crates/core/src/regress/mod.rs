//! From-scratch regressors sharing a fit/predict contract.

mod forest;
mod linear;
mod tree;

use serde::{Deserialize, Serialize};

pub use forest::{forest_fit, forest_predict, tree_rng, ForestModel};
pub use linear::{mlr_fit, mlr_predict, LinearModel, MAX_CONDITION, RIDGE_JITTER};
pub use tree::{tree_fit, tree_predict, Tree, TreeNode, GAIN_EPS};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Random-forest hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until another stopping rule fires.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    /// Features tried per split; `None` means `ceil(F / 3)`.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
    /// Worker threads for tree construction. Never affects the fitted model.
    #[serde(skip)]
    pub n_threads: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: None,
            min_samples_leaf: 2,
            min_samples_split: 4,
            mtry: None,
            bootstrap: true,
            n_threads: None,
        }
    }
}

impl ForestParams {
    pub fn resolved_mtry(&self, n_features: usize) -> usize {
        self.mtry.unwrap_or_else(|| n_features.div_ceil(3)).clamp(1, n_features.max(1))
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::BadConfig("n_trees must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::BadConfig("min_samples_leaf must be at least 1".into()));
        }
        if self.max_depth == Some(0) {
            return Err(Error::BadConfig("max_depth must be at least 1".into()));
        }
        if let Some(m) = self.mtry {
            if m == 0 || m > n_features {
                return Err(Error::BadConfig(format!(
                    "mtry {m} outside [1, {n_features}]"
                )));
            }
        }
        Ok(())
    }
}

/// Common fit/predict contract. Predicting before fitting is an error.
pub trait Regressor {
    fn fit(&mut self, x: &Matrix, y: &[f64]) -> Result<()>;
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>>;
    fn is_fitted(&self) -> bool;
}

#[derive(Debug, Clone, Default)]
pub struct LinearRegressor {
    model: Option<LinearModel>,
}

impl LinearRegressor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn model(&self) -> Option<&LinearModel> {
        self.model.as_ref()
    }

    pub fn into_model(self) -> Option<LinearModel> {
        self.model
    }
}

impl Regressor for LinearRegressor {
    fn fit(&mut self, x: &Matrix, y: &[f64]) -> Result<()> {
        self.model = Some(mlr_fit(x, y)?);
        Ok(())
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.model.as_ref().ok_or(Error::NotFitted)?.predict(x)
    }

    fn is_fitted(&self) -> bool {
        self.model.is_some()
    }
}

#[derive(Debug, Clone)]
pub struct ForestRegressor {
    params: ForestParams,
    seed: u64,
    model: Option<ForestModel>,
}

impl ForestRegressor {
    pub fn new(params: ForestParams, seed: u64) -> Self {
        Self {
            params,
            seed,
            model: None,
        }
    }

    pub fn model(&self) -> Option<&ForestModel> {
        self.model.as_ref()
    }

    pub fn into_model(self) -> Option<ForestModel> {
        self.model
    }
}

impl Regressor for ForestRegressor {
    fn fit(&mut self, x: &Matrix, y: &[f64]) -> Result<()> {
        self.model = Some(forest_fit(x, y, &self.params, self.seed)?);
        Ok(())
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.model.as_ref().ok_or(Error::NotFitted)?.predict(x)
    }

    fn is_fitted(&self) -> bool {
        self.model.is_some()
    }
}
