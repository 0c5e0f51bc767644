//! Neighbor-window heuristic for visible corrections.
//!
//! At an hour with a negative observed delta, the correction is the visible
//! loss plus the views the hour would normally have collected, estimated from
//! the surrounding hours. Other hours estimate to zero.

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::exec::Executor;
use crate::metrics::{evaluate, Estimator, ReconstructionReport};
use crate::series::{CorrectionEstimate, GroundTruthSeries, ViewSeries};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    Minimum,
    Mean,
}

impl Statistic {
    pub fn as_str(self) -> &'static str {
        match self {
            Statistic::Minimum => "minimum",
            Statistic::Mean => "mean",
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Symmetric window: `half_width_hours` on each side of the target hour.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowSpec {
    pub half_width_hours: u32,
    pub statistic: Statistic,
}

impl WindowSpec {
    pub fn new(half_width_hours: u32, statistic: Statistic) -> Result<Self> {
        if half_width_hours == 0 {
            return Err(Error::InvalidParam("window half-width must be at least 1 hour".into()));
        }
        Ok(Self {
            half_width_hours,
            statistic,
        })
    }

    /// Expected views at `hour` from its neighbors. Negative neighbors count
    /// as zero, missing ones are skipped, and an empty window yields zero.
    /// The mean is rounded half-up.
    pub fn expected_views(&self, deltas: &[Option<i64>], hour: usize) -> u64 {
        let w = self.half_width_hours as usize;
        let lo = hour.saturating_sub(w);
        let hi = (hour + w).min(deltas.len().saturating_sub(1));
        let neighbors = (lo..=hi)
            .filter(|&j| j != hour)
            .filter_map(|j| deltas[j])
            .map(|d| d.max(0) as u64);
        match self.statistic {
            Statistic::Minimum => neighbors.min().unwrap_or(0),
            Statistic::Mean => {
                let (sum, n) = neighbors.fold((0u64, 0u64), |(s, n), d| (s + d, n + 1));
                if n == 0 {
                    0
                } else {
                    (2 * sum + n) / (2 * n)
                }
            }
        }
    }
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            half_width_hours: 1,
            statistic: Statistic::Minimum,
        }
    }
}

impl fmt::Display for WindowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}h-{}", self.half_width_hours, self.statistic)
    }
}

pub fn benchmark_estimate(observed: &ViewSeries, window: &WindowSpec) -> CorrectionEstimate {
    let deltas = observed.deltas();
    let estimates = deltas
        .iter()
        .enumerate()
        .map(|(h, d)| match d {
            Some(d) if *d < 0 => d.unsigned_abs() + window.expected_views(deltas, h),
            _ => 0,
        })
        .collect();
    CorrectionEstimate {
        video_id: observed.video_id().into(),
        estimates,
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Benchmark(pub WindowSpec);

impl Estimator for Benchmark {
    fn estimate(&self, observed: &ViewSeries) -> CorrectionEstimate {
        benchmark_estimate(observed, &self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub window: WindowSpec,
    pub report: ReconstructionReport,
}

/// Scores every (half-width, statistic) combination on a ground-truth corpus.
pub fn window_sweep<X: Executor>(
    truth: &[GroundTruthSeries],
    half_widths: &[u32],
    statistics: &[Statistic],
    exec: &X,
) -> Result<Vec<SweepRow>> {
    if half_widths.is_empty() || statistics.is_empty() {
        return Err(Error::InvalidParam("window sweep needs a nonempty grid".into()));
    }
    let mut rows = Vec::with_capacity(half_widths.len() * statistics.len());
    for &w in half_widths {
        for &s in statistics {
            let window = WindowSpec::new(w, s)?;
            let report = evaluate(truth, &Benchmark(window), exec)?;
            rows.push(SweepRow { window, report });
        }
    }
    Ok(rows)
}

/// Sweep row with the smallest lost-corrections fraction; earlier rows win
/// ties.
pub fn best_by_lost_corrections(rows: &[SweepRow]) -> Option<&SweepRow> {
    rows.iter().fold(None, |best: Option<&SweepRow>, r| match best {
        Some(b) if b.report.lost_corrections <= r.report.lost_corrections => Some(b),
        _ => Some(r),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::metrics::naive_estimate;
    use crate::series::test_support::*;
    use crate::series::{Resolution, VideoMeta};
    use alloc::vec;
    use proptest::prelude::*;

    fn obs(d: &[i64]) -> ViewSeries {
        ViewSeries::from_deltas(meta("v"), Resolution::Hour, d).unwrap()
    }

    #[test]
    fn substitutes_neighbor_minimum() {
        let w = WindowSpec::default();
        assert_eq!(benchmark_estimate(&obs(&[10, -4, 8]), &w).estimates, vec![0, 12, 0]);
        assert_eq!(
            benchmark_estimate(&obs(&[0, 0, -0, 4, -4, 0]), &w).estimates,
            vec![0, 0, 0, 0, 4, 0]
        );
        assert_eq!(benchmark_estimate(&obs(&[5, 3, 2]), &w).estimates, vec![0, 0, 0]);
    }

    #[test]
    fn neighbors_are_clamped_and_edges_one_sided() {
        let w = WindowSpec::default();
        // the -3 neighbor counts as zero
        assert_eq!(
            benchmark_estimate(&obs(&[20, 9, -3, -2, 7]), &w).estimates,
            vec![0, 0, 3, 2, 0]
        );
        // last slot sees only its left neighbor
        assert_eq!(benchmark_estimate(&obs(&[10, -4]), &w).estimates, vec![0, 14]);
        let s = ViewSeries::new(meta("v"), Resolution::Hour, vec![Some(10), Some(-4), None]).unwrap();
        assert_eq!(benchmark_estimate(&s, &w).estimates, vec![0, 14, 0]);
    }

    #[test]
    fn mean_statistic_rounds_half_up() {
        let w = WindowSpec::new(2, Statistic::Mean).unwrap();
        // neighbors 10, 3, 4, 4 → mean 5.25 → 5
        assert_eq!(w.expected_views(&[Some(10), Some(3), Some(-1), Some(4), Some(4)], 2), 5);
        // neighbors 1, 2 → 1.5 → 2
        assert_eq!(
            WindowSpec::new(1, Statistic::Mean)
                .unwrap()
                .expected_views(&[Some(1), Some(-1), Some(2)], 1),
            2
        );
    }

    #[test]
    fn zero_half_width_rejected() {
        assert!(WindowSpec::new(0, Statistic::Minimum).is_err());
    }

    /// Corrections during steady 10 views/hour: the naive reading loses 10 per
    /// intervention hour, the window estimate recovers them exactly.
    #[test]
    fn recovers_expected_views_on_steady_traffic() {
        let mut corpus = vec![];
        for i in 0..5 {
            let mut views = vec![10u64; 24];
            let mut corr = vec![0u64; 24];
            for &h in &[3 + i, 12 + i] {
                views[h] = 10;
                corr[h] = 25 + i as u64;
            }
            corpus.push(
                GroundTruthSeries::new(
                    VideoMeta::new(alloc::format!("v{i}"), "c", at(2021, 1, 1, 0, 0)),
                    Resolution::Hour,
                    views,
                    corr,
                )
                .unwrap(),
            );
        }
        // brute force: naive misses exactly the hour's 10 views per event
        let true_mass: u64 = corpus.iter().flat_map(|t| t.corrections()).sum();
        let events = corpus.iter().flat_map(|t| t.interventions()).count() as u64;
        let naive_lost = (10 * events) as f64 / true_mass as f64;

        let naive = evaluate(&corpus, &naive_estimate, &Sequential).unwrap();
        let bench = evaluate(&corpus, &Benchmark::default(), &Sequential).unwrap();
        assert_eq!(naive.lost_corrections, naive_lost);
        assert_eq!(bench.lost_corrections, 0.0);
        assert_eq!(bench.added_corrections, 0.0);
        assert!(bench.lost_corrections < naive.lost_corrections);

        let rows = window_sweep(&corpus, &[1, 2, 3], &[Statistic::Minimum, Statistic::Mean], &Sequential).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(best_by_lost_corrections(&rows).unwrap().window, WindowSpec::default());
    }

    fn arb_deltas() -> impl Strategy<Value = Vec<i64>> {
        prop::collection::vec(-30i64..60, 1..60).prop_map(|mut d| {
            let mut total = 0;
            for x in d.iter_mut() {
                if total + *x < 0 {
                    *x = -total;
                }
                total += *x;
            }
            d
        })
    }

    proptest! {
        #[test]
        fn dominates_naive_and_respects_indicator(d in arb_deltas(), w in 1u32..6, mean in any::<bool>()) {
            let s = obs(&d);
            let spec = WindowSpec::new(w, if mean { Statistic::Mean } else { Statistic::Minimum }).unwrap();
            let b = benchmark_estimate(&s, &spec).estimates;
            let n = naive_estimate(&s).estimates;
            for h in 0..d.len() {
                prop_assert!(b[h] >= n[h]);
                if d[h] >= 0 {
                    prop_assert_eq!(b[h], 0);
                }
            }
        }

        #[test]
        fn shift_invariant_away_from_edges(d in arb_deltas(), pad in 1usize..5) {
            let spec = WindowSpec::default();
            let mut shifted = vec![0i64; pad];
            shifted.extend(&d);
            let a = benchmark_estimate(&obs(&d), &spec).estimates;
            let b = benchmark_estimate(&obs(&shifted), &spec).estimates;
            // slot 0 gains a left neighbor of zero after shifting
            for h in 1..d.len() {
                prop_assert_eq!(a[h], b[h + pad]);
            }
        }
    }
}
