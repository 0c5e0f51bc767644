use alloc::vec::Vec;

use super::features::series_features;
use super::gbdt::TreeEnsembleModel;
use crate::benchmark::{benchmark_estimate, WindowSpec};
use crate::metrics::Estimator;
use crate::series::{CorrectionEstimate, ViewSeries};

/// Benchmark estimate at visible hours, plus `expected - delta` at hours the
/// caller flags as hiding a correction.
pub fn reconstruct_with_flags(observed: &ViewSeries, flags: &[bool], window: &WindowSpec) -> CorrectionEstimate {
    let mut est = benchmark_estimate(observed, window);
    let deltas = observed.deltas();
    for (h, (&flag, d)) in flags.iter().zip(deltas).enumerate() {
        if let (true, Some(d)) = (flag, *d) {
            if d >= 0 {
                let expected = window.expected_views(deltas, h) as i64;
                est.estimates[h] = (expected - d).max(0) as u64;
            }
        }
    }
    est
}

pub fn reconstruct(observed: &ViewSeries, model: &TreeEnsembleModel, window: &WindowSpec) -> CorrectionEstimate {
    let flags: Vec<bool> = series_features(observed)
        .iter()
        .map(|row| model.predict_row(row))
        .collect();
    reconstruct_with_flags(observed, &flags, window)
}

/// The classifier-assisted estimator.
#[derive(Debug, Clone)]
pub struct Reconstructor {
    pub model: TreeEnsembleModel,
    pub window: WindowSpec,
}

impl Estimator for Reconstructor {
    fn estimate(&self, observed: &ViewSeries) -> CorrectionEstimate {
        reconstruct(observed, &self.model, &self.window)
    }
}
