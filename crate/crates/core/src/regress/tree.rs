//! CART regression trees grown by greedy variance reduction.
//!
//! Each tree keeps one position list per feature, presorted by that feature.
//! A node owns the same contiguous range in every list, and splitting a node
//! stably partitions every range, so every level costs `O(F·n)` instead of
//! re-sorting.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ForestParams;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Splits whose SSE reduction is at or below this fraction of the node SSE
/// count as zero-gain.
pub const GAIN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreeNode {
    Leaf {
        value: f64,
        n_samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A fitted tree stored as a node arena; the root is node 0 and every
/// parent precedes its children.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "FlatTree", try_from = "FlatTree")]
pub struct Tree {
    nodes: Vec<TreeNode>,
    n_features: usize,
}

impl Tree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.n_features {
            return Err(Error::ShapeMismatch {
                expected: self.n_features,
                got: row.len(),
            });
        }
        Ok(self.route(row))
    }

    /// Descends left when `value ≤ threshold`. The row length is unchecked.
    pub(crate) fn route(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { value, .. } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }
}

pub fn tree_predict(tree: &Tree, row: &[f64]) -> Result<f64> {
    tree.predict_row(row)
}

/// Fits one tree on every row of `x` (no resampling).
pub fn tree_fit<R: Rng>(x: &Matrix, y: &[f64], params: &ForestParams, rng: &mut R) -> Result<Tree> {
    let sample: Vec<usize> = (0..x.n_rows()).collect();
    fit_on_sample(x, y, &sample, params, rng)
}

/// Fits one tree on the (possibly repeated) rows listed in `sample`.
pub(crate) fn fit_on_sample<R: Rng>(
    x: &Matrix,
    y: &[f64],
    sample: &[usize],
    params: &ForestParams,
    rng: &mut R,
) -> Result<Tree> {
    if sample.is_empty() || x.n_rows() == 0 {
        return Err(Error::EmptyInput);
    }
    if y.len() != x.n_rows() {
        return Err(Error::ShapeMismatch {
            expected: x.n_rows(),
            got: y.len(),
        });
    }
    let n_features = x.n_cols();
    if n_features == 0 {
        return Err(Error::ShapeMismatch { expected: 1, got: 0 });
    }
    params.validate(n_features)?;
    let mut builder = Builder::new(x, y, sample, params, n_features);
    builder.grow(rng);
    Ok(Tree {
        nodes: builder.nodes,
        n_features,
    })
}

struct Builder<'a> {
    params: &'a ForestParams,
    mtry: usize,
    /// `cols[f][p]`: value of feature `f` at sample position `p`.
    cols: Vec<Vec<f64>>,
    targets: Vec<f64>,
    /// `order[f][..]`: sample positions, sorted by feature `f` within each node range.
    order: Vec<Vec<u32>>,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
    nodes: Vec<TreeNode>,
}

struct Pending {
    node: usize,
    lo: usize,
    hi: usize,
    depth: usize,
}

#[derive(Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
    n_left: usize,
}

impl<'a> Builder<'a> {
    fn new(x: &Matrix, y: &[f64], sample: &[usize], params: &'a ForestParams, n_features: usize) -> Self {
        let cols: Vec<Vec<f64>> = (0..n_features)
            .map(|f| sample.iter().map(|&r| x.get(r, f)).collect())
            .collect();
        let targets: Vec<f64> = sample.iter().map(|&r| y[r]).collect();
        let order = cols
            .iter()
            .map(|col| {
                let mut o: Vec<u32> = (0..sample.len() as u32).collect();
                o.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                o
            })
            .collect();
        Self {
            params,
            mtry: params.resolved_mtry(n_features),
            cols,
            targets,
            order,
            goes_left: vec![false; sample.len()],
            scratch: Vec::with_capacity(sample.len()),
            nodes: Vec::new(),
        }
    }

    fn grow<R: Rng>(&mut self, rng: &mut R) {
        let n = self.targets.len();
        let mut stack = vec![Pending {
            node: self.push_placeholder(),
            lo: 0,
            hi: n,
            depth: 0,
        }];
        let mut features: Vec<usize> = (0..self.cols.len()).collect();
        while let Some(p) = stack.pop() {
            match self.best_split(&p, &mut features, rng) {
                None => self.nodes[p.node] = self.leaf(p.lo, p.hi),
                Some(c) => {
                    self.partition(c, p.lo, p.hi);
                    let mid = p.lo + c.n_left;
                    let left = self.push_placeholder();
                    let right = self.push_placeholder();
                    self.nodes[p.node] = TreeNode::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left,
                        right,
                    };
                    // Right first so the left subtree is expanded next.
                    stack.push(Pending {
                        node: right,
                        lo: mid,
                        hi: p.hi,
                        depth: p.depth + 1,
                    });
                    stack.push(Pending {
                        node: left,
                        lo: p.lo,
                        hi: mid,
                        depth: p.depth + 1,
                    });
                }
            }
        }
    }

    fn push_placeholder(&mut self) -> usize {
        self.nodes.push(TreeNode::Leaf {
            value: f64::NAN,
            n_samples: 0,
        });
        self.nodes.len() - 1
    }

    fn leaf(&self, lo: usize, hi: usize) -> TreeNode {
        let ys = self.order[0][lo..hi].iter().map(|&p| self.targets[p as usize]);
        let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for v in ys {
            min = min.min(v);
            max = max.max(v);
            sum += v;
        }
        let n = hi - lo;
        TreeNode::Leaf {
            value: (sum / n as f64).clamp(min, max),
            n_samples: n,
        }
    }

    fn best_split<R: Rng>(&self, p: &Pending, features: &mut [usize], rng: &mut R) -> Option<Candidate> {
        let n = p.hi - p.lo;
        if n < self.params.min_samples_split || n < 2 * self.params.min_samples_leaf {
            return None;
        }
        if self.params.max_depth.is_some_and(|d| p.depth >= d) {
            return None;
        }
        let positions = &self.order[0][p.lo..p.hi];
        let mean = positions.iter().map(|&q| self.targets[q as usize]).sum::<f64>() / n as f64;
        let sse: f64 = positions
            .iter()
            .map(|&q| (self.targets[q as usize] - mean).powi(2))
            .sum();
        if sse <= 0.0 {
            return None;
        }

        features.shuffle(rng);
        let mut best: Option<Candidate> = None;
        let mut evaluated = 0;
        // Evaluate mtry features; if none of them admits a split, keep drawing.
        for &f in features.iter() {
            if evaluated >= self.mtry && best.is_some() {
                break;
            }
            evaluated += 1;
            if let Some(c) = self.scan_feature(f, p.lo, p.hi, mean, sse) {
                if best.map_or(true, |b| better(&c, &b)) {
                    best = Some(c);
                }
            }
        }
        best
    }

    /// Best threshold on one feature; thresholds are midpoints between
    /// consecutive distinct values, scanned in increasing order.
    fn scan_feature(&self, f: usize, lo: usize, hi: usize, mean: f64, sse: f64) -> Option<Candidate> {
        let n = hi - lo;
        let min_leaf = self.params.min_samples_leaf;
        let col = &self.cols[f];
        let ord = &self.order[f][lo..hi];
        let total: f64 = ord.iter().map(|&q| self.targets[q as usize] - mean).sum();
        let mut left_sum = 0.0;
        let mut best: Option<Candidate> = None;
        for i in 0..n - 1 {
            let q = ord[i] as usize;
            left_sum += self.targets[q] - mean;
            let n_left = i + 1;
            let n_right = n - n_left;
            if n_left < min_leaf {
                continue;
            }
            if n_right < min_leaf {
                break;
            }
            let here = col[q];
            let next = col[ord[i + 1] as usize];
            if here == next {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / n_left as f64 + right_sum * right_sum / n_right as f64
                - total * total / n as f64;
            if gain <= GAIN_EPS * sse {
                continue;
            }
            if best.map_or(true, |b| gain > b.gain) {
                best = Some(Candidate {
                    feature: f,
                    threshold: midpoint(here, next),
                    gain,
                    n_left,
                });
            }
        }
        best
    }

    fn partition(&mut self, c: Candidate, lo: usize, hi: usize) {
        let col = &self.cols[c.feature];
        for &q in &self.order[c.feature][lo..hi] {
            self.goes_left[q as usize] = col[q as usize] <= c.threshold;
        }
        for ord in &mut self.order {
            self.scratch.clear();
            let range = &mut ord[lo..hi];
            let mut w = 0;
            for i in 0..range.len() {
                let q = range[i];
                if self.goes_left[q as usize] {
                    range[w] = q;
                    w += 1;
                } else {
                    self.scratch.push(q);
                }
            }
            debug_assert_eq!(w, c.n_left);
            range[w..].copy_from_slice(&self.scratch);
        }
    }
}

/// Higher gain wins; equal gains go to the lower feature index, then the
/// lower threshold.
fn better(a: &Candidate, b: &Candidate) -> bool {
    if a.gain != b.gain {
        return a.gain > b.gain;
    }
    if a.feature != b.feature {
        return a.feature < b.feature;
    }
    a.threshold < b.threshold
}

/// Midpoint of two distinct values, never rounded up onto `hi`.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = (lo + hi) / 2.0;
    if m >= hi {
        lo
    } else {
        m
    }
}

/// Serialized form: parallel arrays, one entry per node. Leaves carry
/// `feature = -1` and child indices of 0.
#[derive(Serialize, Deserialize)]
struct FlatTree {
    n_features: usize,
    feature: Vec<i64>,
    threshold: Vec<f64>,
    left: Vec<usize>,
    right: Vec<usize>,
    value: Vec<f64>,
    n_samples: Vec<usize>,
}

impl From<Tree> for FlatTree {
    fn from(t: Tree) -> Self {
        let mut flat = FlatTree {
            n_features: t.n_features,
            feature: Vec::with_capacity(t.nodes.len()),
            threshold: Vec::with_capacity(t.nodes.len()),
            left: Vec::with_capacity(t.nodes.len()),
            right: Vec::with_capacity(t.nodes.len()),
            value: Vec::with_capacity(t.nodes.len()),
            n_samples: Vec::with_capacity(t.nodes.len()),
        };
        for node in t.nodes {
            match node {
                TreeNode::Leaf { value, n_samples } => {
                    flat.feature.push(-1);
                    flat.threshold.push(0.0);
                    flat.left.push(0);
                    flat.right.push(0);
                    flat.value.push(value);
                    flat.n_samples.push(n_samples);
                }
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    flat.feature.push(feature as i64);
                    flat.threshold.push(threshold);
                    flat.left.push(left);
                    flat.right.push(right);
                    flat.value.push(0.0);
                    flat.n_samples.push(0);
                }
            }
        }
        flat
    }
}

impl TryFrom<FlatTree> for Tree {
    type Error = String;

    fn try_from(f: FlatTree) -> std::result::Result<Self, String> {
        let n = f.feature.len();
        if [f.threshold.len(), f.left.len(), f.right.len(), f.value.len(), f.n_samples.len()]
            .iter()
            .any(|&l| l != n)
            || n == 0
        {
            return Err("tree arrays have inconsistent lengths".into());
        }
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            if f.feature[i] < 0 {
                nodes.push(TreeNode::Leaf {
                    value: f.value[i],
                    n_samples: f.n_samples[i],
                });
            } else {
                let feature = f.feature[i] as usize;
                let (left, right) = (f.left[i], f.right[i]);
                // Children always follow their parent.
                if feature >= f.n_features || left <= i || right <= i || left >= n || right >= n {
                    return Err(format!("malformed split node {i}"));
                }
                nodes.push(TreeNode::Split {
                    feature,
                    threshold: f.threshold[i],
                    left,
                    right,
                });
            }
        }
        Ok(Tree {
            nodes,
            n_features: f.n_features,
        })
    }
}
