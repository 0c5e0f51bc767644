//! Video-level train/test split shared by `train`, `tune` and `evaluate`.

use viewtrace_core::classifier::tuning::{cross_validate, f1, rows_of_groups, split_groups};
use viewtrace_core::classifier::{
    build_training_set, gbdt, CvOutcome, Dataset, LabeledSet, ModelParams, ParamGrid, TreeEnsembleModel,
};
use viewtrace_core::exec::Executor;
use viewtrace_core::series::GroundTruthSeries;

pub const DEFAULT_TEST_FRACTION: f64 = 0.22;

pub struct Prepared {
    pub set: LabeledSet,
    pub data: Dataset,
    pub train_videos: Vec<u32>,
    pub test_videos: Vec<u32>,
    pub train_rows: Vec<u32>,
    pub test_rows: Vec<u32>,
}

impl Prepared {
    pub fn new(truth: &[GroundTruthSeries], test_fraction: f64, seed: u64) -> anyhow::Result<Self> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(crate::error::usage("test fraction must lie in [0, 1)"));
        }
        let set = build_training_set(truth)?;
        let data = Dataset::from_rows(&set.rows)?;
        let (train_videos, test_videos) = split_groups(truth.len(), test_fraction, seed);
        let train_rows = rows_of_groups(&set.groups, &train_videos);
        let test_rows = rows_of_groups(&set.groups, &test_videos);
        Ok(Self {
            set,
            data,
            train_videos,
            test_videos,
            train_rows,
            test_rows,
        })
    }

    pub fn train(&self, params: &ModelParams) -> anyhow::Result<TreeEnsembleModel> {
        Ok(gbdt::train_rows(&self.data, &self.train_rows, params)?)
    }

    /// F1 on the held-out videos' rows.
    pub fn heldout_f1(&self, model: &TreeEnsembleModel) -> anyhow::Result<f64> {
        let labels: Vec<bool> = self.test_rows.iter().map(|&r| self.data.labels()[r as usize]).collect();
        let predictions: Vec<bool> = self
            .test_rows
            .iter()
            .map(|&r| model.predict(self.data.row(r as usize)))
            .collect();
        Ok(f1(&labels, &predictions)?)
    }

    /// Grouped k-fold search restricted to the training videos.
    pub fn tune<X: Executor>(&self, grid: &ParamGrid, folds: usize, exec: &X) -> anyhow::Result<CvOutcome> {
        let rows: Vec<_> = self
            .train_rows
            .iter()
            .map(|&r| self.set.rows[r as usize].clone())
            .collect();
        let groups: Vec<u32> = self.train_rows.iter().map(|&r| self.set.groups[r as usize]).collect();
        let data = Dataset::from_rows(&rows)?;
        Ok(cross_validate(&data, &groups, grid, folds, exec)?)
    }

    pub fn test_truth(&self, truth: &[GroundTruthSeries]) -> Vec<GroundTruthSeries> {
        self.test_videos.iter().map(|&g| truth[g as usize].clone()).collect()
    }
}
