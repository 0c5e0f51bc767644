use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Reconstructed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub channels_with_interventions: f64,
    pub videos_with_interventions: f64,
    pub total_corrections: u64,
    /// Total corrections over total observed (net) views.
    pub corrections_to_views: f64,
}

/// Share of channels and videos with at least one estimated intervention,
/// total estimated corrections, and their ratio to net observed views.
/// Empty inputs yield zeros.
pub fn coverage_stats(corpus: &[Reconstructed<'_>]) -> CoverageStats {
    let mut channels: BTreeMap<&str, bool> = BTreeMap::new();
    let mut videos_hit = 0usize;
    let mut total_corrections = 0u64;
    let mut net_views = 0i64;
    for r in corpus {
        let hit = r.corrections().iter().any(|&c| c > 0);
        *channels.entry(&r.series.meta().channel_id).or_default() |= hit;
        videos_hit += usize::from(hit);
        total_corrections += r.estimate.total();
        net_views += r.series.deltas().iter().flatten().sum::<i64>();
    }
    let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    CoverageStats {
        channels_with_interventions: frac(channels.values().filter(|&&h| h).count(), channels.len()),
        videos_with_interventions: frac(videos_hit, corpus.len()),
        total_corrections,
        corrections_to_views: if net_views > 0 {
            total_corrections as f64 / net_views as f64
        } else {
            0.0
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorenzCurve {
    /// (population share, mass share) from (0, 0) to (1, 1).
    pub points: Vec<(f64, f64)>,
    pub gini: f64,
}

impl LorenzCurve {
    /// Mass share held by the top `fraction` of the population, read off the
    /// curve with linear interpolation.
    pub fn top_share(&self, fraction: f64) -> f64 {
        let x = 1.0 - fraction.clamp(0.0, 1.0);
        let i = self.points.partition_point(|p| p.0 < x);
        let below = if i == 0 {
            0.0
        } else if i >= self.points.len() {
            1.0
        } else {
            let (a, b) = (self.points[i - 1], self.points[i]);
            if b.0 == a.0 {
                b.1
            } else {
                a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
            }
        };
        1.0 - below
    }
}

/// Lorenz curve of nonnegative values; Gini is one minus twice the
/// trapezoidal area under the curve.
pub fn lorenz(values: &[f64]) -> Result<LorenzCurve> {
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidParam(
            "lorenz values must be finite and nonnegative".into(),
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let total: f64 = sorted.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroMass);
    }
    let n = sorted.len() as f64;
    let mut points = Vec::with_capacity(sorted.len() + 1);
    points.push((0.0, 0.0));
    let mut cum = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        cum += v;
        points.push(((i + 1) as f64 / n, cum / total));
    }
    let last = points.len() - 1;
    points[last] = (1.0, 1.0);
    let area: f64 = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum();
    Ok(LorenzCurve {
        points,
        gini: 1.0 - 2.0 * area,
    })
}
