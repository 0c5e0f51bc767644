//! Gradient-boosted binary classification trees.
//!
//! Second-order boosting on the logistic loss with histogram split search:
//! every feature is cut into at most `max_bins` bins once per training call,
//! trees grow depth-first, and the larger child's histogram is derived by
//! subtracting the smaller child's from its parent's. Leaf weights carry an
//! L1 (soft-threshold) and an L2 penalty on the gradient sum, and every
//! stored leaf weight already includes the learning rate.
//!
//! Training is sequential and deterministic: ties in split gain keep the
//! first candidate in (feature, bin) order.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::features::{FeatureRow, NUM_FEATURES};
use crate::{Error, Result};

const MIN_SPLIT_GAIN: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub max_depth: u32,
    pub learning_rate: f64,
    /// L1 penalty on leaf weights (soft threshold on the gradient sum).
    pub l1_regularization: f64,
    pub l2_regularization: f64,
    /// Minimum hessian sum in each child of a split.
    pub min_child_weight: f64,
    pub num_rounds: u32,
    pub decision_threshold: f64,
    pub max_bins: u16,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            max_depth: 25,
            learning_rate: 0.2,
            l1_regularization: 1.0,
            l2_regularization: 1.0,
            min_child_weight: 1.0,
            num_rounds: 60,
            decision_threshold: 0.5,
            max_bins: 256,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParam(m.into()));
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1");
        }
        if self.num_rounds == 0 {
            return bad("num_rounds must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.l1_regularization >= 0.0 && self.l2_regularization >= 0.0 && self.min_child_weight >= 0.0) {
            return bad("regularization terms must be nonnegative");
        }
        if !(self.decision_threshold > 0.0 && self.decision_threshold < 1.0) {
            return bad("decision_threshold must lie in (0, 1)");
        }
        if !(2..=256).contains(&self.max_bins) {
            return bad("max_bins must lie in 2..=256");
        }
        Ok(())
    }
}

/// Dense row-major feature matrix with binary labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    n_features: usize,
    values: Vec<f64>,
    labels: Vec<bool>,
}

impl Dataset {
    pub fn new(n_features: usize, values: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if n_features == 0 || values.len() != n_features * labels.len() {
            return Err(Error::InvalidParam("feature matrix does not match label count".into()));
        }
        Ok(Self {
            n_features,
            values,
            labels,
        })
    }

    /// Requires every row to carry a label.
    pub fn from_rows(rows: &[FeatureRow]) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * NUM_FEATURES);
        let mut labels = Vec::with_capacity(rows.len());
        for r in rows {
            values.extend_from_slice(&r.values());
            labels.push(
                r.label
                    .ok_or_else(|| Error::InvalidParam("unlabeled feature row".into()))?,
            );
        }
        Self::new(NUM_FEATURES, values, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// `x[feature] < threshold` goes left.
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        weight: f64,
    },
}

/// Node arena; the root is `nodes[0]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_value(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { weight } => return *weight,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature as usize] < *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsembleModel {
    pub params: ModelParams,
    pub n_features: usize,
    pub base_score: f64,
    pub trees: Vec<Tree>,
}

impl TreeEnsembleModel {
    pub fn predict_margin(&self, x: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.leaf_value(x)).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.predict_margin(x))
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.predict_proba(x) >= self.params.decision_threshold
    }

    pub fn predict_row(&self, row: &FeatureRow) -> bool {
        self.predict(&row.values())
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.params.decision_threshold = threshold;
        self
    }

    /// Structural check for models loaded from outside: indices in range,
    /// children after their parent (so there are no cycles).
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let bad = |m: &str| Err(Error::InvalidParam(m.into()));
        for tree in &self.trees {
            if tree.nodes.is_empty() {
                return bad("empty tree");
            }
            for (i, node) in tree.nodes.iter().enumerate() {
                if let Node::Split {
                    feature, left, right, ..
                } = node
                {
                    let n = tree.nodes.len();
                    if *feature as usize >= self.n_features {
                        return bad("split feature index out of range");
                    }
                    if (*left as usize) <= i || (*right as usize) <= i || *left as usize >= n || *right as usize >= n {
                        return bad("child index out of range");
                    }
                }
            }
        }
        Ok(())
    }
}

fn sigmoid(m: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-m))
}

pub fn train(data: &Dataset, params: &ModelParams) -> Result<TreeEnsembleModel> {
    let rows: Vec<u32> = (0..data.len() as u32).collect();
    train_rows(data, &rows, params)
}

/// Trains on a subset of rows without copying the matrix.
pub fn train_rows(data: &Dataset, rows: &[u32], params: &ModelParams) -> Result<TreeEnsembleModel> {
    params.validate()?;
    let y: Vec<f64> = rows
        .iter()
        .map(|&r| if data.labels[r as usize] { 1.0 } else { 0.0 })
        .collect();
    let pos = y.iter().sum::<f64>();
    if pos == 0.0 || pos == y.len() as f64 {
        return Err(Error::SingleClass);
    }
    let base_score = libm::log(pos / (y.len() as f64 - pos));
    let binned = Binned::new(data, rows, params.max_bins as usize);

    let n = rows.len();
    let mut margin = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.num_rounds as usize);
    for _ in 0..params.num_rounds {
        for i in 0..n {
            let p = sigmoid(margin[i]);
            grad[i] = p - y[i];
            hess[i] = (p * (1.0 - p)).max(1e-16);
        }
        let (tree, update) = TreeBuilder::new(&binned, &grad, &hess, params).build();
        for (m, u) in margin.iter_mut().zip(&update) {
            *m += u;
        }
        trees.push(tree);
    }
    Ok(TreeEnsembleModel {
        params: params.clone(),
        n_features: data.n_features,
        base_score,
        trees,
    })
}

/// Quantized copy of the training rows: `bins[i * F + f]` is the bin of
/// feature `f` in the i-th training row.
struct Binned {
    n_features: usize,
    bins: Vec<u8>,
    cuts: Vec<Vec<f64>>,
    offsets: Vec<usize>,
    total_bins: usize,
}

impl Binned {
    fn new(data: &Dataset, rows: &[u32], max_bins: usize) -> Self {
        let f_count = data.n_features;
        let mut cuts = Vec::with_capacity(f_count);
        let mut column = Vec::with_capacity(rows.len());
        for f in 0..f_count {
            column.clear();
            column.extend(rows.iter().map(|&r| data.row(r as usize)[f]));
            cuts.push(feature_cuts(&mut column, max_bins));
        }
        let mut bins = vec![0u8; rows.len() * f_count];
        for (i, &r) in rows.iter().enumerate() {
            let x = data.row(r as usize);
            for f in 0..f_count {
                bins[i * f_count + f] = cuts[f].partition_point(|&c| c <= x[f]) as u8;
            }
        }
        let mut offsets = Vec::with_capacity(f_count);
        let mut total_bins = 0;
        for c in &cuts {
            offsets.push(total_bins);
            total_bins += c.len() + 1;
        }
        Self {
            n_features: f_count,
            bins,
            cuts,
            offsets,
            total_bins,
        }
    }
}

/// Cut points such that `x < cut` separates bins. Few distinct values get a
/// cut between every neighboring pair; otherwise cuts sit at evenly spaced
/// order statistics, plus one cut isolating the smallest value.
fn feature_cuts(values: &mut [f64], max_bins: usize) -> Vec<f64> {
    values.sort_unstable_by(f64::total_cmp);
    let mut uniques: Vec<f64> = Vec::new();
    for &v in values.iter() {
        if uniques.last() != Some(&v) {
            uniques.push(v);
        }
    }
    if uniques.len() <= max_bins {
        return uniques.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0).collect();
    }
    let n = values.len();
    let mut cuts = vec![uniques[1]];
    let quantile_cuts = max_bins - 2;
    for b in 1..=quantile_cuts {
        let v = values[b * n / (quantile_cuts + 1)];
        if v > *cuts.last().unwrap() {
            cuts.push(v);
        }
    }
    cuts
}

struct Hist {
    g: Vec<f64>,
    h: Vec<f64>,
    n: Vec<u32>,
}

impl Hist {
    fn zeros(len: usize) -> Self {
        Self {
            g: vec![0.0; len],
            h: vec![0.0; len],
            n: vec![0; len],
        }
    }

    fn subtract(mut self, other: &Hist) -> Self {
        for i in 0..self.g.len() {
            self.g[i] -= other.g[i];
            self.h[i] -= other.h[i];
            self.n[i] -= other.n[i];
        }
        self
    }
}

struct Task {
    node: usize,
    rows: Vec<u32>,
    depth: u32,
    hist: Hist,
    g: f64,
    h: f64,
}

struct SplitChoice {
    gain: f64,
    feature: usize,
    bin: usize,
    left_g: f64,
    left_h: f64,
}

struct TreeBuilder<'a> {
    binned: &'a Binned,
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a ModelParams,
    nodes: Vec<Node>,
    update: Vec<f64>,
}

impl<'a> TreeBuilder<'a> {
    fn new(binned: &'a Binned, grad: &'a [f64], hess: &'a [f64], params: &'a ModelParams) -> Self {
        Self {
            binned,
            grad,
            hess,
            params,
            nodes: Vec::new(),
            update: vec![0.0; grad.len()],
        }
    }

    fn soft_threshold(&self, g: f64) -> f64 {
        let a = self.params.l1_regularization;
        if g > a {
            g - a
        } else if g < -a {
            g + a
        } else {
            0.0
        }
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        let den = h + self.params.l2_regularization;
        if den <= 0.0 {
            return 0.0;
        }
        let t = self.soft_threshold(g);
        t * t / den
    }

    fn leaf_weight(&self, g: f64, h: f64) -> f64 {
        let den = h + self.params.l2_regularization;
        if den <= 0.0 {
            return 0.0;
        }
        -self.soft_threshold(g) / den * self.params.learning_rate
    }

    fn histogram(&self, rows: &[u32]) -> Hist {
        let f_count = self.binned.n_features;
        let mut hist = Hist::zeros(self.binned.total_bins);
        for &r in rows {
            let r = r as usize;
            let (g, h) = (self.grad[r], self.hess[r]);
            let bins = &self.binned.bins[r * f_count..(r + 1) * f_count];
            for (f, &b) in bins.iter().enumerate() {
                let idx = self.binned.offsets[f] + b as usize;
                hist.g[idx] += g;
                hist.h[idx] += h;
                hist.n[idx] += 1;
            }
        }
        hist
    }

    fn best_split(&self, task: &Task) -> Option<SplitChoice> {
        let parent = self.score(task.g, task.h);
        let total_n = task.rows.len() as u32;
        let mcw = self.params.min_child_weight;
        let mut best: Option<SplitChoice> = None;
        for f in 0..self.binned.n_features {
            let start = self.binned.offsets[f];
            let n_bins = self.binned.cuts[f].len() + 1;
            let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0u32);
            for b in 0..n_bins - 1 {
                let idx = start + b;
                gl += task.hist.g[idx];
                hl += task.hist.h[idx];
                nl += task.hist.n[idx];
                if nl == 0 {
                    continue;
                }
                if nl == total_n {
                    break;
                }
                let (gr, hr) = (task.g - gl, task.h - hl);
                if hl < mcw || hr < mcw {
                    continue;
                }
                let gain = self.score(gl, hl) + self.score(gr, hr) - parent;
                if gain > MIN_SPLIT_GAIN && best.as_ref().is_none_or(|s| gain > s.gain) {
                    best = Some(SplitChoice {
                        gain,
                        feature: f,
                        bin: b,
                        left_g: gl,
                        left_h: hl,
                    });
                }
            }
        }
        best
    }

    fn build(mut self) -> (Tree, Vec<f64>) {
        let all: Vec<u32> = (0..self.grad.len() as u32).collect();
        let hist = self.histogram(&all);
        let g = self.grad.iter().sum();
        let h = self.hess.iter().sum();
        self.nodes.push(Node::Leaf { weight: 0.0 });
        let mut stack = vec![Task {
            node: 0,
            rows: all,
            depth: 0,
            hist,
            g,
            h,
        }];
        let f_count = self.binned.n_features;
        while let Some(task) = stack.pop() {
            let split = if task.depth < self.params.max_depth && task.rows.len() >= 2 {
                self.best_split(&task)
            } else {
                None
            };
            let Some(split) = split else {
                let w = self.leaf_weight(task.g, task.h);
                self.nodes[task.node] = Node::Leaf { weight: w };
                for &r in &task.rows {
                    self.update[r as usize] = w;
                }
                continue;
            };
            let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = task
                .rows
                .iter()
                .partition(|&&r| (self.binned.bins[r as usize * f_count + split.feature] as usize) <= split.bin);
            let (left_hist, right_hist) = if left_rows.len() <= right_rows.len() {
                let small = self.histogram(&left_rows);
                let large = task.hist.subtract(&small);
                (small, large)
            } else {
                let small = self.histogram(&right_rows);
                let large = task.hist.subtract(&small);
                (large, small)
            };
            let left = self.nodes.len();
            self.nodes.push(Node::Leaf { weight: 0.0 });
            self.nodes.push(Node::Leaf { weight: 0.0 });
            self.nodes[task.node] = Node::Split {
                feature: split.feature as u32,
                threshold: self.binned.cuts[split.feature][split.bin],
                left: left as u32,
                right: left as u32 + 1,
            };
            stack.push(Task {
                node: left + 1,
                rows: right_rows,
                depth: task.depth + 1,
                hist: right_hist,
                g: task.g - split.left_g,
                h: task.h - split.left_h,
            });
            stack.push(Task {
                node: left,
                rows: left_rows,
                depth: task.depth + 1,
                hist: left_hist,
                g: split.left_g,
                h: split.left_h,
            });
        }
        (Tree { nodes: self.nodes }, self.update)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(depth: u32, rounds: u32) -> ModelParams {
        ModelParams {
            max_depth: depth,
            num_rounds: rounds,
            learning_rate: 0.3,
            l1_regularization: 0.0,
            ..ModelParams::default()
        }
    }

    fn noisy_xor(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            let c: f64 = rng.random_range(-1.0..1.0);
            values.extend_from_slice(&[a, b, c]);
            labels.push((a > 0.0) != (b > 0.0) || rng.random_bool(0.05));
        }
        Dataset::new(3, values, labels).unwrap()
    }

    fn accuracy(model: &TreeEnsembleModel, data: &Dataset) -> f64 {
        let hits = (0..data.len())
            .filter(|&i| model.predict(data.row(i)) == data.labels()[i])
            .count();
        hits as f64 / data.len() as f64
    }

    #[test]
    fn learns_separable_hour_rule() {
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for i in 0..480 {
            let hour = (i % 24) as f64;
            values.extend_from_slice(&[hour, (i * 7 % 13) as f64]);
            labels.push(hour == 17.0);
        }
        let data = Dataset::new(2, values, labels).unwrap();
        let model = train(&data, &params(2, 30)).unwrap();
        assert_eq!(accuracy(&model, &data), 1.0);
        assert!(model.trees.iter().all(|t| t.depth() <= 2));
    }

    #[test]
    fn learns_interaction() {
        let train_set = noisy_xor(2000, 1);
        let test_set = noisy_xor(1000, 2);
        let model = train(&train_set, &params(4, 40)).unwrap();
        assert!(accuracy(&model, &test_set) > 0.9);
    }

    #[test]
    fn single_class_is_an_error() {
        let data = Dataset::new(1, vec![1.0, 2.0, 3.0], vec![false; 3]).unwrap();
        assert_eq!(train(&data, &params(3, 5)), Err(Error::SingleClass));
    }

    #[test]
    fn invalid_params_rejected() {
        let data = noisy_xor(50, 3);
        for p in [
            ModelParams {
                max_depth: 0,
                ..params(1, 1)
            },
            ModelParams {
                num_rounds: 0,
                ..params(1, 1)
            },
            ModelParams {
                learning_rate: 0.0,
                ..params(1, 1)
            },
            ModelParams {
                l1_regularization: -1.0,
                ..params(1, 1)
            },
            ModelParams {
                decision_threshold: 1.0,
                ..params(1, 1)
            },
        ] {
            assert!(matches!(train(&data, &p), Err(Error::InvalidParam(_))));
        }
    }

    #[test]
    fn training_is_reproducible() {
        let data = noisy_xor(800, 4);
        let probe = noisy_xor(200, 5);
        let a = train(&data, &params(6, 20)).unwrap();
        let b = train(&data, &params(6, 20)).unwrap();
        assert_eq!(a, b);
        for i in 0..probe.len() {
            assert_eq!(a.predict_proba(probe.row(i)), b.predict_proba(probe.row(i)));
        }
    }

    /// With no regularization, doubling every row doubles every gradient and
    /// hessian sum, which leaves split choices and leaf weights unchanged.
    #[test]
    fn duplicating_rows_leaves_predictions() {
        let data = noisy_xor(600, 6);
        let mut values = data.values.clone();
        values.extend_from_slice(&data.values);
        let mut labels = data.labels.clone();
        labels.extend_from_slice(&data.labels);
        let doubled = Dataset::new(3, values, labels).unwrap();
        let p = ModelParams {
            l2_regularization: 0.0,
            min_child_weight: 0.0,
            ..params(3, 10)
        };
        let a = train(&data, &p).unwrap();
        let b = train(&doubled, &p).unwrap();
        let probe = noisy_xor(300, 7);
        for i in 0..probe.len() {
            let (pa, pb) = (a.predict_proba(probe.row(i)), b.predict_proba(probe.row(i)));
            assert!((pa - pb).abs() < 1e-9, "{pa} vs {pb}");
        }
    }

    #[test]
    fn l1_shrinks_leaf_weights() {
        let data = noisy_xor(500, 8);
        let plain = train(&data, &params(3, 1)).unwrap();
        let shrunk = train(
            &data,
            &ModelParams {
                l1_regularization: 5.0,
                ..params(3, 1)
            },
        )
        .unwrap();
        let mass = |m: &TreeEnsembleModel| {
            m.trees[0]
                .nodes
                .iter()
                .map(|n| match n {
                    Node::Leaf { weight } => weight.abs(),
                    _ => 0.0,
                })
                .fold(0.0, f64::max)
        };
        assert!(mass(&shrunk) < mass(&plain));
    }

    #[test]
    fn cuts_isolate_smallest_value() {
        let mut v: Vec<f64> = (0..1000).map(|i| (i % 500) as f64).collect();
        v.push(i64::MIN as f64);
        let cuts = feature_cuts(&mut v, 16);
        assert_eq!(cuts[0], 0.0);
        assert!(cuts.len() <= 15);
        assert!(cuts.windows(2).all(|w| w[0] < w[1]));

        let mut few = [3.0, 1.0, 1.0, 2.0];
        assert_eq!(feature_cuts(&mut few, 16), vec![1.5, 2.5]);
    }

    #[test]
    fn validate_catches_bad_structure() {
        let data = noisy_xor(300, 9);
        let mut m = train(&data, &params(3, 2)).unwrap();
        assert!(m.validate().is_ok());
        m.trees[0].nodes[0] = Node::Split {
            feature: 9,
            threshold: 0.0,
            left: 1,
            right: 2,
        };
        assert!(m.validate().is_err());
    }
}
