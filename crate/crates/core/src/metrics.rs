//! Evaluation metrics: RMSE, coefficient of determination and MAE.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_pair(y_hat: &[f64], y: &[f64]) -> Result<()> {
    if y_hat.len() != y.len() {
        return Err(Error::ShapeMismatch {
            expected: y.len(),
            got: y_hat.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Root of the mean squared difference.
pub fn rmse(y_hat: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(y_hat, y)?;
    let sse: f64 = y_hat.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum();
    Ok((sse / y.len() as f64).sqrt())
}

/// `1 − SS_res / SS_tot`, with `SS_tot` taken about the mean of `y`.
/// Negative values are returned unchanged.
pub fn r2(y_hat: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(y_hat, y)?;
    if y.len() < 2 {
        return Err(Error::TooFewRows { needed: 2, got: y.len() });
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ConstantTarget);
    }
    let ss_res: f64 = y.iter().zip(y_hat).map(|(t, p)| (t - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn mae(y_hat: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(y_hat, y)?;
    let sae: f64 = y_hat.iter().zip(y).map(|(p, t)| (p - t).abs()).sum();
    Ok(sae / y.len() as f64)
}

/// R² and RMSE over one set of predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricPair {
    pub r2: f64,
    pub rmse: f64,
    pub n: usize,
}

impl MetricPair {
    pub fn compute(y_hat: &[f64], y: &[f64]) -> Result<Self> {
        Ok(Self {
            r2: r2(y_hat, y)?,
            rmse: rmse(y_hat, y)?,
            n: y.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_cases() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 12.5f64.sqrt());
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r2(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(r2(&[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0]).unwrap(), -6.0);
        assert_eq!(mae(&[1.0, 2.0], &[3.0, 2.0]).unwrap(), 1.0);
        assert_eq!(mae(&[5.0], &[5.0]).unwrap(), 0.0);
    }

    #[test]
    fn error_paths() {
        assert!(matches!(rmse(&[], &[]), Err(Error::EmptyInput)));
        assert!(matches!(mae(&[1.0], &[1.0, 2.0]), Err(Error::ShapeMismatch { .. })));
        assert!(matches!(r2(&[1.0, 2.0], &[3.0, 3.0]), Err(Error::ConstantTarget)));
        assert!(matches!(r2(&[1.0], &[3.0]), Err(Error::TooFewRows { .. })));
    }

    fn pairs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..64).prop_flat_map(|n| {
            (
                prop::collection::vec(-100.0f64..100.0, n),
                prop::collection::vec(-100.0f64..100.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn rmse_symmetric_and_dominates_mae((a, b) in pairs()) {
            prop_assert_eq!(rmse(&a, &b).unwrap(), rmse(&b, &a).unwrap());
            prop_assert!(mae(&a, &b).unwrap() <= rmse(&a, &b).unwrap() * (1.0 + 1e-12));
        }

        #[test]
        fn permutation_invariant((a, b) in pairs(), rot in 0usize..64) {
            let k = rot % a.len();
            let mut ra = a.clone();
            let mut rb = b.clone();
            ra.rotate_left(k);
            rb.rotate_left(k);
            let d = (rmse(&a, &b).unwrap() - rmse(&ra, &rb).unwrap()).abs();
            prop_assert!(d <= 1e-12 * rmse(&a, &b).unwrap().max(1.0));
        }

        #[test]
        fn perfect_fit_iff_zero_rmse((_a, b) in pairs()) {
            prop_assume!(b.iter().any(|v| *v != b[0]));
            prop_assert_eq!(r2(&b, &b).unwrap(), 1.0);
            prop_assert_eq!(rmse(&b, &b).unwrap(), 0.0);
        }
    }
}
