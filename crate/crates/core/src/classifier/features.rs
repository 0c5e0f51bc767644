//! Per-hour feature rows.

use alloc::vec::Vec;

use crate::series::{GroundTruthSeries, ViewSeries};
use crate::{Error, Result};

/// Hours read on each side of the target hour.
pub const WINDOW: usize = 12;
/// Stand-in for a neighbor outside the series or never polled. It lies below
/// every achievable delta, so trees can isolate it with a single split.
pub const MISSING: i64 = i64::MIN;
/// 24 neighbors, the target hour's own delta, hour of day, hours since
/// publication.
pub const NUM_FEATURES: usize = 2 * WINDOW + 3;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureRow {
    /// Observed deltas at offsets -12..=-1 then +1..=+12.
    pub neighbor_deltas: [i64; 2 * WINDOW],
    /// Observed delta of the target hour itself.
    pub delta: i64,
    pub hour_of_day: u8,
    pub hours_since_publication: u32,
    pub label: Option<bool>,
}

impl FeatureRow {
    pub fn values(&self) -> [f64; NUM_FEATURES] {
        let mut out = [0.0; NUM_FEATURES];
        for (o, &d) in out.iter_mut().zip(&self.neighbor_deltas) {
            *o = d as f64;
        }
        out[2 * WINDOW] = self.delta as f64;
        out[2 * WINDOW + 1] = f64::from(self.hour_of_day);
        out[2 * WINDOW + 2] = f64::from(self.hours_since_publication);
        out
    }
}

pub fn extract_features(observed: &ViewSeries, hour: usize) -> Result<FeatureRow> {
    let deltas = observed.deltas();
    if hour >= deltas.len() {
        return Err(Error::HourOutOfRange {
            hour,
            len: deltas.len(),
        });
    }
    let at = |j: isize| -> i64 {
        usize::try_from(j)
            .ok()
            .and_then(|j| deltas.get(j).copied().flatten())
            .unwrap_or(MISSING)
    };
    let h = hour as isize;
    let mut neighbor_deltas = [MISSING; 2 * WINDOW];
    for k in 0..WINDOW {
        neighbor_deltas[k] = at(h - (WINDOW - k) as isize);
        neighbor_deltas[WINDOW + k] = at(h + 1 + k as isize);
    }
    Ok(FeatureRow {
        neighbor_deltas,
        delta: at(h),
        hour_of_day: observed.meta().hour_of_day(hour),
        hours_since_publication: hour as u32,
        label: None,
    })
}

/// Unlabeled rows for every hour of a series.
pub fn series_features(observed: &ViewSeries) -> Vec<FeatureRow> {
    (0..observed.len())
        .map(|h| extract_features(observed, h).expect("hour within series"))
        .collect()
}

/// Labeled rows with the index of the video each row came from, so splits
/// can keep a video's overlapping windows on one side.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabeledSet {
    pub rows: Vec<FeatureRow>,
    pub groups: Vec<u32>,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.rows.iter().filter(|r| r.label == Some(true)).count()
    }

    pub fn num_groups(&self) -> usize {
        self.groups.iter().max().map_or(0, |&g| g as usize + 1)
    }
}

/// Label for one hour: positive only for a correction the hourly counter
/// hides. Hours with a visible negative delta are negatives; the benchmark
/// rule already handles them.
pub fn concealed_label(true_correction: u64, observed_delta: Option<i64>) -> bool {
    true_correction > 0 && observed_delta.is_some_and(|d| d >= 0)
}

/// One row per hour of every video, labeled from the hourly-aggregated truth.
pub fn build_training_set(truth: &[GroundTruthSeries]) -> Result<LabeledSet> {
    let mut set = LabeledSet::default();
    for (g, t) in truth.iter().enumerate() {
        let hourly = t.to_hourly()?;
        let observed = hourly.observe();
        for (h, mut row) in series_features(&observed).into_iter().enumerate() {
            row.label = Some(concealed_label(hourly.corrections()[h], observed.deltas()[h]));
            set.rows.push(row);
            set.groups.push(g as u32);
        }
    }
    Ok(set)
}
