//! F1 scoring, decision-threshold selection and grouped k-fold grid search.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gbdt::{train_rows, Dataset, ModelParams, TreeEnsembleModel};
use crate::exec::Executor;
use crate::{Error, Result};

/// Candidate decision thresholds.
pub const THRESHOLDS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn from_pairs(labels: &[bool], predictions: &[bool]) -> Result<Self> {
        if labels.len() != predictions.len() {
            return Err(Error::PredictionLength {
                labels: labels.len(),
                predictions: predictions.len(),
            });
        }
        let mut c = Self::default();
        for (&l, &p) in labels.iter().zip(predictions) {
            match (l, p) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn f1(&self) -> Result<f64> {
        if self.tp + self.fp + self.fn_ == 0 {
            return Err(Error::NoPositives);
        }
        // 2pr/(p+r) with p = tp/(tp+fp), r = tp/(tp+fn)
        Ok(2.0 * self.tp as f64 / (2 * self.tp + self.fp + self.fn_) as f64)
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1(labels: &[bool], predictions: &[bool]) -> Result<f64> {
    Confusion::from_pairs(labels, predictions)?.f1()
}

/// F1 at every candidate threshold. A set without any positive label or
/// prediction scores 0.
pub fn f1_by_threshold(labels: &[bool], probabilities: &[f64]) -> Vec<f64> {
    THRESHOLDS
        .iter()
        .map(|&t| {
            let preds: Vec<bool> = probabilities.iter().map(|&p| p >= t).collect();
            f1(labels, &preds).unwrap_or(0.0)
        })
        .collect()
}

/// Threshold with the highest F1; the lowest threshold wins ties.
pub fn best_threshold(scores: &[f64]) -> (f64, f64) {
    let mut best = (THRESHOLDS[0], scores[0]);
    for (&t, &s) in THRESHOLDS.iter().zip(scores).skip(1) {
        if s > best.1 {
            best = (t, s);
        }
    }
    best
}

pub fn tune_threshold(labels: &[bool], probabilities: &[f64]) -> (f64, f64) {
    best_threshold(&f1_by_threshold(labels, probabilities))
}

/// Cartesian grid over the tuned hyperparameters; everything else is taken
/// from `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub max_depth: Vec<u32>,
    pub learning_rate: Vec<f64>,
    pub l1_regularization: Vec<f64>,
    pub num_rounds: Vec<u32>,
    pub base: ModelParams,
}

impl ParamGrid {
    /// Depth {5,15,25} x learning rate {0.05,0.2,0.5} x L1 {0,1,10}.
    pub fn standard() -> Self {
        let base = ModelParams::default();
        Self {
            max_depth: vec![5, 15, 25],
            learning_rate: vec![0.05, 0.2, 0.5],
            l1_regularization: vec![0.0, 1.0, 10.0],
            num_rounds: vec![base.num_rounds],
            base,
        }
    }

    pub fn single(params: ModelParams) -> Self {
        Self {
            max_depth: vec![params.max_depth],
            learning_rate: vec![params.learning_rate],
            l1_regularization: vec![params.l1_regularization],
            num_rounds: vec![params.num_rounds],
            base: params,
        }
    }

    pub fn points(&self) -> Vec<ModelParams> {
        let mut out = Vec::new();
        for &max_depth in &self.max_depth {
            for &learning_rate in &self.learning_rate {
                for &l1_regularization in &self.l1_regularization {
                    for &num_rounds in &self.num_rounds {
                        out.push(ModelParams {
                            max_depth,
                            learning_rate,
                            l1_regularization,
                            num_rounds,
                            ..self.base.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

/// Assigns groups (videos) to `k` folds so positive rows spread evenly:
/// groups are taken in decreasing positive count (ties by index) and each
/// goes to the fold with the fewest positives, then fewest rows, then lowest
/// index.
pub fn group_folds(labels: &[bool], groups: &[u32], k: usize) -> Vec<usize> {
    let n_groups = groups.iter().max().map_or(0, |&g| g as usize + 1);
    let mut pos = vec![0u64; n_groups];
    let mut size = vec![0u64; n_groups];
    for (&l, &g) in labels.iter().zip(groups) {
        size[g as usize] += 1;
        pos[g as usize] += u64::from(l);
    }
    let mut order: Vec<usize> = (0..n_groups).collect();
    order.sort_by(|&a, &b| pos[b].cmp(&pos[a]).then(size[b].cmp(&size[a])).then(a.cmp(&b)));
    let mut fold_pos = vec![0u64; k];
    let mut fold_size = vec![0u64; k];
    let mut assignment = vec![0usize; n_groups];
    for g in order {
        let f = (0..k).min_by_key(|&f| (fold_pos[f], fold_size[f], f)).unwrap();
        assignment[g] = f;
        fold_pos[f] += pos[g];
        fold_size[f] += size[g];
    }
    assignment
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    /// Grid point, with the decision threshold set to the best one found.
    pub params: ModelParams,
    pub mean_f1: f64,
    pub fold_f1: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub best: ModelParams,
    pub table: Vec<CvRow>,
}

/// Grouped, positive-stratified k-fold cross-validation over a parameter grid.
///
/// For each grid point the decision threshold maximizing mean validation F1
/// across folds is chosen; the grid point with the highest such mean wins.
/// Ties prefer the smaller (max_depth, num_rounds, -l1) and then grid order.
/// A fold whose training side holds a single class scores 0.
pub fn cross_validate<X: Executor>(
    data: &Dataset,
    groups: &[u32],
    grid: &ParamGrid,
    k: usize,
    exec: &X,
) -> Result<CvOutcome> {
    if k < 2 {
        return Err(Error::InvalidParam("cross-validation needs k >= 2".into()));
    }
    if groups.len() != data.len() {
        return Err(Error::InvalidParam("one group per row required".into()));
    }
    let points = grid.points();
    if points.is_empty() {
        return Err(Error::InvalidParam("empty parameter grid".into()));
    }
    for p in &points {
        p.validate()?;
    }
    let assignment = group_folds(data.labels(), groups, k);
    if assignment.len() < k {
        return Err(Error::InvalidParam("fewer groups than folds".into()));
    }
    let fold_of = |r: usize| assignment[groups[r] as usize];
    let folds: Vec<(Vec<u32>, Vec<u32>)> = (0..k)
        .map(|f| (0..data.len() as u32).partition(|&r| fold_of(r as usize) != f))
        .collect();

    let tasks: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..k).map(move |f| (p, f))).collect();
    let scores: Vec<Result<Vec<f64>>> = exec.map(&tasks, |&(p, f)| {
        let (train, valid) = &folds[f];
        match train_rows(data, train, &points[p]) {
            Ok(model) => Ok(validation_scores(&model, data, valid)),
            Err(Error::SingleClass) => Ok(vec![0.0; THRESHOLDS.len()]),
            Err(e) => Err(e),
        }
    });

    let mut table = Vec::with_capacity(points.len());
    let mut per_point = scores.into_iter();
    for point in points {
        let fold_scores = per_point.by_ref().take(k).collect::<Result<Vec<_>>>()?;
        let mean: Vec<f64> = (0..THRESHOLDS.len())
            .map(|t| fold_scores.iter().map(|s| s[t]).sum::<f64>() / k as f64)
            .collect();
        let (threshold, mean_f1) = best_threshold(&mean);
        let t_idx = THRESHOLDS.iter().position(|&x| x == threshold).unwrap();
        table.push(CvRow {
            params: ModelParams {
                decision_threshold: threshold,
                ..point
            },
            mean_f1,
            fold_f1: fold_scores.iter().map(|s| s[t_idx]).collect(),
        });
    }
    let best = table
        .iter()
        .fold(None, |best: Option<&CvRow>, row| match best {
            Some(b) if !beats(row, b) => Some(b),
            _ => Some(row),
        })
        .map(|r| r.params.clone())
        .expect("nonempty grid");
    Ok(CvOutcome { best, table })
}

fn beats(a: &CvRow, b: &CvRow) -> bool {
    if a.mean_f1 != b.mean_f1 {
        return a.mean_f1 > b.mean_f1;
    }
    let key = |r: &CvRow| (r.params.max_depth, r.params.num_rounds, -r.params.l1_regularization);
    let (ka, kb) = (key(a), key(b));
    (ka.0, ka.1) < (kb.0, kb.1) || ((ka.0, ka.1) == (kb.0, kb.1) && ka.2 < kb.2)
}

fn validation_scores(model: &TreeEnsembleModel, data: &Dataset, rows: &[u32]) -> Vec<f64> {
    let labels: Vec<bool> = rows.iter().map(|&r| data.labels()[r as usize]).collect();
    let probs: Vec<f64> = rows
        .iter()
        .map(|&r| model.predict_proba(data.row(r as usize)))
        .collect();
    f1_by_threshold(&labels, &probs)
}

/// Shuffles group ids with a seeded RNG and puts the first `test_fraction`
/// of them in the test set. Returns `(train_groups, test_groups)`.
pub fn split_groups(n_groups: usize, test_fraction: f64, seed: u64) -> (Vec<u32>, Vec<u32>) {
    let mut ids: Vec<u32> = (0..n_groups as u32).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = libm::round(n_groups as f64 * test_fraction) as usize;
    let mut test = ids[..n_test].to_vec();
    let mut train = ids[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    (train, test)
}

/// Row indices whose group is in `wanted` (sorted).
pub fn rows_of_groups(groups: &[u32], wanted: &[u32]) -> Vec<u32> {
    (0..groups.len() as u32)
        .filter(|&r| wanted.binary_search(&groups[r as usize]).is_ok())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn f1_examples() {
        assert_eq!(f1(&[true, false, true], &[true, false, true]).unwrap(), 1.0);
        assert_eq!(f1(&[true, false, false], &[false, false, false]).unwrap(), 0.0);
        assert_eq!(
            f1(&[true, true, false, false], &[true, false, true, false]).unwrap(),
            0.5
        );
        assert_eq!(
            f1(&[true], &[true, false]),
            Err(Error::PredictionLength {
                labels: 1,
                predictions: 2
            })
        );
        assert_eq!(f1(&[false], &[false]), Err(Error::NoPositives));
    }

    #[test]
    fn f1_matches_precision_recall_form() {
        // p = 2/3, r = 2/5
        let labels = [true, true, true, true, true, false, false, false];
        let preds = [true, true, false, false, false, true, false, false];
        let (p, r) = (2.0 / 3.0, 2.0 / 5.0);
        assert!((f1(&labels, &preds).unwrap() - 2.0 * p * r / (p + r)).abs() < 1e-12);
    }

    #[test]
    fn grid_points_and_single() {
        assert_eq!(ParamGrid::standard().points().len(), 27);
        let p = ModelParams {
            max_depth: 3,
            ..ModelParams::default()
        };
        assert_eq!(ParamGrid::single(p.clone()).points(), vec![p]);
    }

    #[test]
    fn folds_balance_positives() {
        let mut labels = Vec::new();
        let mut groups = Vec::new();
        for g in 0..20u32 {
            for h in 0..10 {
                labels.push(h < (g % 4) as usize);
                groups.push(g);
            }
        }
        let a = group_folds(&labels, &groups, 5);
        let mut per_fold = [0u32; 5];
        for (&l, &g) in labels.iter().zip(&groups) {
            per_fold[a[g as usize]] += u32::from(l);
        }
        let (lo, hi) = (per_fold.iter().min().unwrap(), per_fold.iter().max().unwrap());
        assert!(hi - lo <= 3, "{per_fold:?}");
    }

    fn toy(n_groups: u32, seed: u64) -> (Dataset, Vec<u32>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut values, mut labels, mut groups) = (vec![], vec![], vec![]);
        for g in 0..n_groups {
            for h in 0..24 {
                let noise: f64 = rng.random_range(0.0..1.0);
                values.extend_from_slice(&[h as f64, noise]);
                labels.push(h == 17 && noise < 0.8);
                groups.push(g);
            }
        }
        (Dataset::new(2, values, labels).unwrap(), groups)
    }

    #[test]
    fn single_point_grid_returns_it() {
        let (data, groups) = toy(20, 1);
        let p = ModelParams {
            max_depth: 2,
            num_rounds: 10,
            ..ModelParams::default()
        };
        let out = cross_validate(&data, &groups, &ParamGrid::single(p.clone()), 5, &Sequential).unwrap();
        assert_eq!(out.table.len(), 1);
        assert_eq!(out.best.max_depth, p.max_depth);
        assert_eq!(out.best.learning_rate, p.learning_rate);
        assert_eq!(out.table[0].fold_f1.len(), 5);
        assert!(out.table[0].mean_f1 > 0.8);
    }

    #[test]
    fn cv_is_deterministic_and_breaks_ties_small() {
        let (data, groups) = toy(15, 2);
        let grid = ParamGrid {
            max_depth: vec![4, 2],
            learning_rate: vec![0.3],
            l1_regularization: vec![0.0],
            num_rounds: vec![10],
            base: ModelParams::default(),
        };
        let a = cross_validate(&data, &groups, &grid, 3, &Sequential).unwrap();
        let b = cross_validate(&data, &groups, &grid, 3, &Sequential).unwrap();
        assert_eq!(a, b);
        // the hour-17 rule needs only shallow trees: equal scores pick depth 2
        if a.table[0].mean_f1 == a.table[1].mean_f1 {
            assert_eq!(a.best.max_depth, 2);
        }
    }

    #[test]
    fn cv_rejects_bad_k() {
        let (data, groups) = toy(5, 3);
        assert!(cross_validate(&data, &groups, &ParamGrid::standard(), 1, &Sequential).is_err());
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let (tr, te) = split_groups(100, 0.22, 9);
        assert_eq!(te.len(), 22);
        assert_eq!(tr.len(), 78);
        assert!(tr.iter().all(|g| te.binary_search(g).is_err()));
        assert_eq!(split_groups(100, 0.22, 9), (tr, te));
        assert_eq!(rows_of_groups(&[0, 0, 1, 2, 2], &[0, 2]), vec![0, 1, 3, 4]);
    }

    proptest! {
        #[test]
        fn f1_permutation_symmetric(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..50), seed in any::<u64>()) {
            let (l, p): (Vec<bool>, Vec<bool>) = pairs.iter().copied().unzip();
            let mut idx: Vec<usize> = (0..l.len()).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let l2: Vec<bool> = idx.iter().map(|&i| l[i]).collect();
            let p2: Vec<bool> = idx.iter().map(|&i| p[i]).collect();
            prop_assert_eq!(f1(&l, &p), f1(&l2, &p2));
        }
    }
}
