//! Corpus analyses over observed series paired with correction estimates.
//!
//! "Real views" at an hour are the observed delta plus the estimated
//! correction, floored at zero; missing hours contribute nothing.

mod concentration;
mod regression;
mod rhythm;
pub mod stats;
mod timing;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

pub use concentration::{coverage_stats, lorenz, CoverageStats, LorenzCurve};
pub use regression::{loglog_regression, RegressionFit};
pub use rhythm::{hourly_rhythm, midnight_profile, peak_hour, HourSummary, MidnightProfile, RhythmQuantity};
pub use timing::{corrections_vs_popularity, TimingProfile};

use crate::series::{CorrectionEstimate, GroundTruthSeries, ViewSeries};
use crate::{Error, Result};

/// An observed series with its aligned estimate.
#[derive(Clone, Copy, Debug)]
pub struct Reconstructed<'a> {
    pub series: &'a ViewSeries,
    pub estimate: &'a CorrectionEstimate,
}

impl<'a> Reconstructed<'a> {
    pub fn real_views(&self) -> impl Iterator<Item = u64> + 'a {
        self.series
            .deltas()
            .iter()
            .zip(&self.estimate.estimates)
            .map(|(d, &c)| d.map_or(0, |d| (d + c as i64).max(0) as u64))
    }

    pub fn corrections(&self) -> &'a [u64] {
        &self.estimate.estimates
    }
}

/// Zips series with estimates, checking ids and lengths.
pub fn pair_up<'a>(series: &'a [ViewSeries], estimates: &'a [CorrectionEstimate]) -> Result<Vec<Reconstructed<'a>>> {
    if series.len() != estimates.len() {
        return Err(Error::CorpusMismatch {
            truth: series.len(),
            estimates: estimates.len(),
        });
    }
    series
        .iter()
        .zip(estimates)
        .map(|(s, e)| {
            if s.video_id() != e.video_id || s.len() != e.estimates.len() {
                return Err(Error::Misaligned {
                    video_id: s.video_id().into(),
                    expected: s.len(),
                    found: e.estimates.len(),
                });
            }
            Ok(Reconstructed { series: s, estimate: e })
        })
        .collect()
}

/// Per-channel (real views, corrections) totals from reconstructions.
pub fn channel_totals(corpus: &[Reconstructed<'_>]) -> BTreeMap<String, (u64, u64)> {
    let mut out: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for r in corpus {
        let e = out.entry(r.series.meta().channel_id.clone()).or_default();
        e.0 += r.real_views().sum::<u64>();
        e.1 += r.estimate.total();
    }
    out
}

/// Per-channel (true views, true corrections) totals from ground truth.
pub fn channel_totals_from_truth(truth: &[GroundTruthSeries]) -> BTreeMap<String, (u64, u64)> {
    let mut out: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for t in truth {
        let e = out.entry(t.meta().channel_id.clone()).or_default();
        e.0 += t.views().iter().sum::<u64>();
        e.1 += t.corrections().iter().sum::<u64>();
    }
    out
}
