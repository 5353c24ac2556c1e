//! Bagged ensemble of CART trees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_on_sample, Tree};
use super::ForestParams;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::parallel::with_threads;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub seed: u64,
    pub n_features: usize,
    /// Smallest and largest training target.
    pub target_range: (f64, f64),
    pub trees: Vec<Tree>,
}

/// RNG for tree `index`: the master seed selects the key, the tree index
/// selects the ChaCha stream, so streams do not depend on scheduling.
pub fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn forest_fit(x: &Matrix, y: &[f64], params: &ForestParams, seed: u64) -> Result<ForestModel> {
    let n = x.n_rows();
    if n == 0 || y.is_empty() {
        return Err(Error::EmptyInput);
    }
    if y.len() != n {
        return Err(Error::ShapeMismatch { expected: n, got: y.len() });
    }
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, got: n });
    }
    params.validate(x.n_cols())?;

    let grow = |index: usize| -> Result<Tree> {
        let mut rng = tree_rng(seed, index);
        if params.bootstrap {
            let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            fit_on_sample(x, y, &sample, params, &mut rng)
        } else {
            let sample: Vec<usize> = (0..n).collect();
            fit_on_sample(x, y, &sample, params, &mut rng)
        }
    };
    let build = || (0..params.n_trees).into_par_iter().map(grow).collect::<Result<Vec<_>>>();
    let trees = with_threads(params.n_threads, build)??;

    let min = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(ForestModel {
        params: params.clone(),
        seed,
        n_features: x.n_cols(),
        target_range: (min, max),
        trees,
    })
}

/// Mean of the per-tree predictions, clamped to the span of the routed leaf
/// values so that constant leaves reproduce their constant exactly.
pub fn forest_predict(model: &ForestModel, x: &Matrix) -> Result<Vec<f64>> {
    if x.n_cols() != model.n_features {
        return Err(Error::ShapeMismatch {
            expected: model.n_features,
            got: x.n_cols(),
        });
    }
    if model.trees.is_empty() {
        return Err(Error::NotFitted);
    }
    let k = model.trees.len() as f64;
    Ok((0..x.n_rows())
        .into_par_iter()
        .map(|i| {
            let row = x.row(i);
            let (mut sum, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
            for tree in &model.trees {
                let v = tree.route(row);
                sum += v;
                lo = lo.min(v);
                hi = hi.max(v);
            }
            (sum / k).clamp(lo, hi)
        })
        .collect())
}

impl ForestModel {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        forest_predict(self, x)
    }
}
