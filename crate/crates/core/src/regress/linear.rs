//! Multiple linear regression solved through the normal equations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Diagonal jitter added to the covariance-scaled Gram matrix.
pub const RIDGE_JITTER: f64 = 1e-10;
/// Condition estimates above this are reported as rank deficient.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Eigenvalue ratio of the jittered, centered Gram matrix.
    pub condition_estimate: f64,
}

impl LinearModel {
    pub fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        mlr_predict(self, x)
    }
}

/// Least-squares fit with an intercept.
///
/// The centered problem `(XcᵀXc/N + λI) β = Xcᵀyc/N` is solved by Cholesky
/// factorization with one step of iterative refinement; the intercept then
/// follows from the column means.
pub fn mlr_fit(x: &Matrix, y: &[f64]) -> Result<LinearModel> {
    let n = x.n_rows();
    let f = x.n_cols();
    if y.len() != n {
        return Err(Error::ShapeMismatch { expected: n, got: y.len() });
    }
    if n <= f || n == 0 {
        return Err(Error::TooFewRows { needed: f + 1, got: n });
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::BadConfig("non-finite values in regression input".into()));
    }

    let x_mean: Vec<f64> = (0..f).map(|j| mean(x.column(j).iter().copied())).collect();
    let y_mean = mean(y.iter().copied());

    let mut gram = vec![vec![0.0; f]; f];
    let mut rhs = vec![0.0; f];
    for (row, &yi) in x.rows().zip(y) {
        let yc = yi - y_mean;
        for a in 0..f {
            let xa = row[a] - x_mean[a];
            rhs[a] += xa * yc;
            for b in 0..=a {
                gram[a][b] += xa * (row[b] - x_mean[b]);
            }
        }
    }
    let scale = 1.0 / n as f64;
    for a in 0..f {
        rhs[a] *= scale;
        for b in 0..=a {
            gram[a][b] *= scale;
            gram[b][a] = gram[a][b];
        }
        gram[a][a] += RIDGE_JITTER;
    }

    let condition = condition_number(&gram);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::RankDeficient { condition });
    }
    let chol = cholesky(&gram).ok_or(Error::RankDeficient { condition })?;
    let mut beta = chol_solve(&chol, &rhs);
    // Refining against the unjittered system removes the jitter bias and
    // recovers accuracy lost to squaring the condition number.
    let resid: Vec<f64> = (0..f)
        .map(|a| rhs[a] + RIDGE_JITTER * beta[a] - (0..f).map(|b| gram[a][b] * beta[b]).sum::<f64>())
        .collect();
    let delta = chol_solve(&chol, &resid);
    for (b, d) in beta.iter_mut().zip(delta) {
        *b += d;
    }

    let intercept = y_mean - beta.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
    if beta.iter().any(|b| !b.is_finite()) || !intercept.is_finite() {
        return Err(Error::RankDeficient { condition });
    }
    Ok(LinearModel {
        coefficients: beta,
        intercept,
        condition_estimate: condition,
    })
}

pub fn mlr_predict(model: &LinearModel, x: &Matrix) -> Result<Vec<f64>> {
    if x.n_cols() != model.n_features() {
        return Err(Error::ShapeMismatch {
            expected: model.n_features(),
            got: x.n_cols(),
        });
    }
    Ok(x.rows()
        .map(|row| {
            model.intercept
                + model
                    .coefficients
                    .iter()
                    .zip(row)
                    .map(|(b, v)| b * v)
                    .sum::<f64>()
        })
        .collect())
}

/// Two-pass mean: the correction term makes constant inputs come back exact.
fn mean(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let m = values.clone().sum::<f64>() / n;
    m + values.map(|v| v - m).sum::<f64>() / n
}

fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

fn chol_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut z = vec![0.0; n];
    for i in 0..n {
        z[i] = (b[i] - (0..i).map(|k| l[i][k] * z[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (z[i] - (i + 1..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    x
}

/// Condition number of a symmetric positive matrix via cyclic Jacobi sweeps.
fn condition_number(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    if n == 0 {
        return 1.0;
    }
    let mut m = a.to_vec();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        let diag: f64 = (0..n).map(|i| m[i][i] * m[i][i]).sum();
        if off <= 1e-30 * diag {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q] == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let eig: Vec<f64> = (0..n).map(|i| m[i][i].abs()).collect();
    let max = eig.iter().cloned().fold(0.0, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
