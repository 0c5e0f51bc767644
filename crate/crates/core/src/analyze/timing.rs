use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Reconstructed;
use crate::{Error, Result};

/// Where correction mass falls relative to each video's audience build-up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingProfile {
    pub percentiles: Vec<f64>,
    /// Share of correction mass at or before the hour each percentile of
    /// final real views is reached.
    pub fraction_before: Vec<f64>,
    /// Share of correction mass after the last hour with positive real views.
    pub fraction_after_stop: f64,
    pub total_corrections: u64,
}

/// First hour whose cumulative real views reach `p` of the final total.
fn reach_hour(cumulative: &[u64], p: f64) -> usize {
    let target = p * cumulative.last().copied().unwrap_or(0) as f64;
    cumulative
        .iter()
        .position(|&c| c as f64 >= target)
        .unwrap_or(cumulative.len().saturating_sub(1))
}

pub fn corrections_vs_popularity(corpus: &[Reconstructed<'_>], percentiles: &[f64]) -> Result<TimingProfile> {
    if let Some(&p) = percentiles.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidParam(alloc::format!("percentile {p} outside [0, 1]")));
    }
    let mut before = alloc::vec![0u64; percentiles.len()];
    let (mut after_stop, mut total) = (0u64, 0u64);
    for r in corpus {
        let real: Vec<u64> = r.real_views().collect();
        let corrections = r.corrections();
        let cumulative: Vec<u64> = real
            .iter()
            .scan(0u64, |acc, &v| {
                *acc += v;
                Some(*acc)
            })
            .collect();
        let mut prefix = alloc::vec![0u64; corrections.len() + 1];
        for (i, &c) in corrections.iter().enumerate() {
            prefix[i + 1] = prefix[i] + c;
        }
        let video_total = prefix[corrections.len()];
        if video_total == 0 {
            continue;
        }
        total += video_total;
        for (b, &p) in before.iter_mut().zip(percentiles) {
            *b += prefix[reach_hour(&cumulative, p) + 1];
        }
        let stop = real.iter().rposition(|&v| v > 0).map_or(0, |h| h + 1);
        after_stop += video_total - prefix[stop];
    }
    if total == 0 {
        return Err(Error::ZeroMass);
    }
    Ok(TimingProfile {
        percentiles: percentiles.to_vec(),
        fraction_before: before.iter().map(|&b| b as f64 / total as f64).collect(),
        fraction_after_stop: after_stop as f64 / total as f64,
        total_corrections: total,
    })
}

#[cfg(test)]
mod tests {
    use super::super::pair_up;
    use super::*;
    use crate::series::test_support::*;
    use crate::series::{CorrectionEstimate, Resolution, ViewSeries};
    use alloc::vec;
    use proptest::prelude::*;

    fn one(deltas: &[i64], est: &[u64]) -> (ViewSeries, CorrectionEstimate) {
        let s = ViewSeries::from_deltas(meta("v"), Resolution::Hour, deltas).unwrap();
        (
            s,
            CorrectionEstimate {
                video_id: "v".into(),
                estimates: est.to_vec(),
            },
        )
    }

    fn profile(deltas: &[i64], est: &[u64], ps: &[f64]) -> Result<TimingProfile> {
        let (s, e) = one(deltas, est);
        corrections_vs_popularity(&pair_up(core::slice::from_ref(&s), core::slice::from_ref(&e))?, ps)
    }

    #[test]
    fn corrections_after_silence() {
        let p = profile(&[50, 30, 10, -4, -6], &[0, 0, 0, 4, 6], &[0.5, 0.9]).unwrap();
        assert_eq!(p.fraction_after_stop, 1.0);
        assert_eq!(p.fraction_before, vec![0.0, 0.0]);
        assert_eq!(p.total_corrections, 10);
    }

    #[test]
    fn corrections_at_publication() {
        let p = profile(&[10, 40, 30, 20], &[7, 0, 0, 0], &[0.1, 0.5, 0.8, 1.0]).unwrap();
        assert_eq!(p.fraction_before, vec![1.0; 4]);
        assert_eq!(p.fraction_after_stop, 0.0);
    }

    #[test]
    fn reach_is_first_hour_at_threshold() {
        // real views 10, 40, 30, 20: cumulative 10, 50, 80, 100
        let p = profile(&[10, 38, 30, 18], &[0, 2, 0, 2], &[0.5, 0.51, 0.8, 0.81]).unwrap();
        assert_eq!(p.fraction_before, vec![0.5, 0.5, 0.5, 1.0]);
    }

    #[test]
    fn no_corrections_is_error() {
        assert!(matches!(profile(&[1, 2], &[0, 0], &[0.5]), Err(Error::ZeroMass)));
        assert!(matches!(profile(&[1, 2], &[1, 0], &[1.5]), Err(Error::InvalidParam(_))));
    }

    proptest! {
        #[test]
        fn monotone_in_percentile(
            deltas in prop::collection::vec(0i64..50, 2..40),
            seed in prop::collection::vec(0u64..5, 40),
            mut ps in prop::collection::vec(0.0f64..=1.0, 1..8),
        ) {
            let est = &seed[..deltas.len()];
            prop_assume!(est.iter().sum::<u64>() > 0);
            ps.sort_by(f64::total_cmp);
            let p = profile(&deltas, est, &ps).unwrap();
            prop_assert!(p.fraction_before.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
