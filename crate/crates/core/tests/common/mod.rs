//! Reference implementations shared by the integration tests and the
//! acceptance suite. None of them call into the crate's numeric code.

#![allow(dead_code)]

use eeatc::matrix::Matrix;
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Least-squares `[intercept, β…]` through the SVD pseudo-inverse of `[1 | X]`.
pub fn pinv_least_squares(x: &Matrix, y: &[f64]) -> Vec<f64> {
    let n = x.n_rows();
    let f = x.n_cols();
    let a = DMatrix::from_fn(n, f + 1, |i, j| if j == 0 { 1.0 } else { x.get(i, j - 1) });
    let pinv = a.pseudo_inverse(1e-13).expect("svd converges");
    let b = pinv * DMatrix::from_column_slice(n, 1, y);
    b.iter().copied().collect()
}

/// A well-posed random regression problem with `n` rows and `f` features.
pub fn random_problem(r: &mut ChaCha8Rng, n: usize, f: usize) -> (Matrix, Vec<f64>) {
    let scales: Vec<f64> = (0..f).map(|_| r.gen_range(0.5..5.0)).collect();
    let offsets: Vec<f64> = (0..f).map(|_| r.gen_range(-10.0..10.0)).collect();
    let beta: Vec<f64> = (0..f).map(|_| r.gen_range(-3.0..3.0)).collect();
    let b0 = r.gen_range(-5.0..5.0);
    let mut data = Vec::with_capacity(n * f);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let mut v = b0 + r.gen_range(-0.5..0.5);
        for j in 0..f {
            let xj = offsets[j] + scales[j] * r.gen_range(-1.0..1.0);
            v += beta[j] * xj;
            data.push(xj);
        }
        y.push(v);
    }
    (Matrix::new(n, f, data).unwrap(), y)
}

/// Best single split by brute force: every feature, every midpoint between
/// distinct sorted values, SSE of both children computed from scratch.
/// Returns `(feature, threshold)` or `None` when no split reduces the SSE.
/// Ties keep the first candidate in (feature, threshold) order.
pub fn exhaustive_stump(x: &Matrix, y: &[f64], min_leaf: usize, eps: f64) -> Option<(usize, f64)> {
    let n = y.len();
    let parent = sse(y);
    if parent <= 0.0 {
        return None;
    }
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x.n_cols() {
        let mut values: Vec<f64> = (0..n).map(|i| x.get(i, f)).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let mut t = (w[0] + w[1]) / 2.0;
            if t >= w[1] {
                t = w[0];
            }
            let left: Vec<f64> = (0..n).filter(|&i| x.get(i, f) <= t).map(|i| y[i]).collect();
            let right: Vec<f64> = (0..n).filter(|&i| x.get(i, f) > t).map(|i| y[i]).collect();
            if left.len() < min_leaf || right.len() < min_leaf {
                continue;
            }
            let gain = parent - sse(&left) - sse(&right);
            if gain <= eps * parent {
                continue;
            }
            if best.map_or(true, |(_, _, g)| gain > g) {
                best = Some((f, t, gain));
            }
        }
    }
    best.map(|(f, t, _)| (f, t))
}

fn sse(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m) * (x - m)).sum()
}

/// Random stump problem. Roughly a third of the datasets use a small integer
/// grid for `x`, so repeated values and duplicated columns occur.
pub fn random_stump_problem(r: &mut ChaCha8Rng) -> (Matrix, Vec<f64>) {
    let n = r.gen_range(2..=32);
    let f = r.gen_range(1..=3);
    let gridded = r.gen_bool(0.35);
    let mut cols: Vec<Vec<f64>> = (0..f)
        .map(|_| {
            (0..n)
                .map(|_| if gridded { r.gen_range(0..5) as f64 } else { r.gen_range(-2.0..2.0) })
                .collect()
        })
        .collect();
    if f > 1 && r.gen_bool(0.2) {
        cols[f - 1] = cols[0].clone();
    }
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let step = if cols[0][i] > 0.5 { 1.5 } else { 0.0 };
            step + r.gen_range(-1.0..1.0)
        })
        .collect();
    (Matrix::from_columns(&cols).unwrap(), y)
}

pub fn loop_rmse(p: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..y.len() {
        let d = p[i] - y[i];
        acc += d * d;
    }
    (acc / y.len() as f64).sqrt()
}

pub fn loop_mae(p: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..y.len() {
        acc += (p[i] - y[i]).abs();
    }
    acc / y.len() as f64
}

pub fn loop_r2(p: &[f64], y: &[f64]) -> f64 {
    let mut mean = 0.0;
    for v in y {
        mean += v;
    }
    mean /= y.len() as f64;
    let (mut res, mut tot) = (0.0, 0.0);
    for i in 0..y.len() {
        res += (y[i] - p[i]) * (y[i] - p[i]);
        tot += (y[i] - mean) * (y[i] - mean);
    }
    1.0 - res / tot
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
