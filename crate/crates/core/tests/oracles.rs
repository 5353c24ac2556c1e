mod common;

use common::*;
use eeatc::matrix::Matrix;
use eeatc::metrics::{mae, r2, rmse};
use eeatc::regress::{mlr_fit, tree_fit, ForestParams, TreeNode, GAIN_EPS};
use proptest::prelude::*;

fn stump_params(f: usize) -> ForestParams {
    ForestParams {
        n_trees: 1,
        max_depth: Some(1),
        min_samples_leaf: 1,
        min_samples_split: 2,
        mtry: Some(f),
        bootstrap: false,
        n_threads: None,
    }
}

fn mse(x: &Matrix, y: &[f64], beta: &[f64], b0: f64) -> f64 {
    let mut acc = 0.0;
    for (i, yi) in y.iter().enumerate() {
        let p = b0 + (0..x.n_cols()).map(|j| beta[j] * x.get(i, j)).sum::<f64>();
        acc += (yi - p) * (yi - p);
    }
    acc / y.len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mlr_matches_pseudo_inverse(seed in any::<u64>(), n in 12usize..=200, f in 1usize..=4) {
        let (x, y) = random_problem(&mut rng(seed), n, f);
        let m = mlr_fit(&x, &y).unwrap();
        let oracle = pinv_least_squares(&x, &y);
        let mut ours = vec![m.intercept];
        ours.extend(&m.coefficients);
        prop_assert!(max_abs_diff(&ours, &oracle) < 1e-8, "{ours:?} vs {oracle:?}");
    }

    #[test]
    fn mlr_residuals_orthogonal(seed in any::<u64>(), n in 12usize..=200, f in 1usize..=4) {
        let (x, y) = random_problem(&mut rng(seed), n, f);
        let m = mlr_fit(&x, &y).unwrap();
        let pred = m.predict(&x).unwrap();
        let resid: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
        prop_assert!(resid.iter().sum::<f64>().abs() <= 1e-6);
        for j in 0..f {
            let dot: f64 = (0..n).map(|i| x.get(i, j) * resid[i]).sum();
            prop_assert!(dot.abs() <= 1e-6, "column {j}: {dot}");
        }
    }

    #[test]
    fn mlr_perturbation_never_improves(seed in any::<u64>(), n in 12usize..=200, f in 1usize..=4) {
        let (x, y) = random_problem(&mut rng(seed), n, f);
        let m = mlr_fit(&x, &y).unwrap();
        let base = mse(&x, &y, &m.coefficients, m.intercept);
        for j in 0..=f {
            for delta in [-1e-3, 1e-3] {
                let mut beta = m.coefficients.clone();
                let mut b0 = m.intercept;
                if j == f { b0 += delta } else { beta[j] += delta }
                prop_assert!(mse(&x, &y, &beta, b0) >= base);
            }
        }
    }

    #[test]
    fn stump_matches_exhaustive_search(seed in any::<u64>()) {
        let (x, y) = random_stump_problem(&mut rng(seed));
        let f = x.n_cols();
        let tree = tree_fit(&x, &y, &stump_params(f), &mut rng(seed ^ 1)).unwrap();
        let got = match *tree.root() {
            TreeNode::Split { feature, threshold, .. } => Some((feature, threshold)),
            TreeNode::Leaf { .. } => None,
        };
        prop_assert_eq!(got, exhaustive_stump(&x, &y, 1, GAIN_EPS));
    }

    #[test]
    fn metrics_match_loops(
        pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 2..300)
    ) {
        let (p, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assume!(y.iter().any(|v| *v != y[0]));
        prop_assert!((rmse(&p, &y).unwrap() - loop_rmse(&p, &y)).abs() <= 1e-12 * (1.0 + loop_rmse(&p, &y)));
        prop_assert!((mae(&p, &y).unwrap() - loop_mae(&p, &y)).abs() <= 1e-12 * (1.0 + loop_mae(&p, &y)));
        prop_assert!((r2(&p, &y).unwrap() - loop_r2(&p, &y)).abs() <= 1e-12 * (1.0 + loop_r2(&p, &y).abs()));
    }
}

#[test]
fn metric_hand_cases() {
    assert_eq!(rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 12.5f64.sqrt());
    assert_eq!(r2(&[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0]).unwrap(), -6.0);
    assert_eq!(mae(&[1.0, -1.0], &[0.0, 0.0]).unwrap(), 1.0);
}

#[test]
fn stump_on_gridded_ties_prefers_lower_feature() {
    let x = Matrix::from_columns(&[vec![0.0, 0.0, 1.0, 1.0], vec![0.0, 0.0, 1.0, 1.0]]).unwrap();
    let y = [0.0, 0.1, 5.0, 5.1];
    let tree = tree_fit(&x, &y, &stump_params(2), &mut rng(3)).unwrap();
    assert!(matches!(*tree.root(), TreeNode::Split { feature: 0, threshold, .. } if threshold == 0.5));
    assert_eq!(exhaustive_stump(&x, &y, 1, GAIN_EPS), Some((0, 0.5)));
}
