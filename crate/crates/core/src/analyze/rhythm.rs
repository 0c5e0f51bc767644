use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use chrono::{NaiveDate, TimeDelta, Timelike};
use serde::{Deserialize, Serialize};

use super::stats::{quantile_sorted, sorted};
use super::Reconstructed;
use crate::series::{Resolution, HOURLY_HORIZON};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhythmQuantity {
    Corrections,
    CorrectedVideos,
    Views,
}

/// Distribution over calendar days of one hour-of-day's corpus total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourSummary {
    pub hour: u8,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub days: usize,
}

/// For each hour of day, sums the quantity over the corpus per calendar day
/// and summarizes those daily totals. Every day from the first to the last
/// covered hour counts, with zero where nothing happened.
pub fn hourly_rhythm(corpus: &[Reconstructed<'_>], quantity: RhythmQuantity) -> Vec<HourSummary> {
    let mut cells: BTreeMap<(NaiveDate, u8), f64> = BTreeMap::new();
    let mut span: Option<(NaiveDate, NaiveDate)> = None;
    for r in corpus {
        let meta = r.series.meta();
        let real: Vec<u64> = r.real_views().collect();
        for (h, &c) in r.corrections().iter().enumerate() {
            let at = meta.slot_start(Resolution::Hour, h);
            let date = at.date();
            span = Some(span.map_or((date, date), |(a, b)| (a.min(date), b.max(date))));
            let value = match quantity {
                RhythmQuantity::Corrections => c as f64,
                RhythmQuantity::CorrectedVideos => f64::from(u8::from(c > 0)),
                RhythmQuantity::Views => real[h] as f64,
            };
            *cells.entry((date, at.hour() as u8)).or_default() += value;
        }
    }
    let days: Vec<NaiveDate> = match span {
        Some((first, last)) => first.iter_days().take_while(|d| *d <= last).collect(),
        None => Vec::new(),
    };
    (0..24u8)
        .map(|hour| {
            let values = sorted(
                days.iter()
                    .map(|d| cells.get(&(*d, hour)).copied().unwrap_or(0.0))
                    .collect(),
            );
            HourSummary {
                hour,
                q1: quantile_sorted(&values, 0.25),
                median: quantile_sorted(&values, 0.5),
                q3: quantile_sorted(&values, 0.75),
                days: values.len(),
            }
        })
        .collect()
}

/// Hour of day whose median is largest; earliest hour wins ties.
pub fn peak_hour(summary: &[HourSummary]) -> Option<u8> {
    summary
        .iter()
        .fold(None, |best: Option<&HourSummary>, s| match best {
            Some(b) if b.median >= s.median => Some(b),
            _ => Some(s),
        })
        .map(|s| s.hour)
}

/// Corpus totals indexed by hours since the midnight before publication,
/// each curve scaled to a maximum of 1 (an all-zero curve stays zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MidnightProfile {
    pub views: Vec<f64>,
    pub corrections: Vec<f64>,
    pub corrected_videos: Vec<f64>,
}

pub fn midnight_profile(corpus: &[Reconstructed<'_>]) -> MidnightProfile {
    let len = 24 + HOURLY_HORIZON;
    let (mut views, mut corrections, mut corrected) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    for r in corpus {
        let first = r.series.meta().first_slot_start(Resolution::Hour);
        let midnight = first.date().and_hms_opt(0, 0, 0).unwrap();
        let lead = ((first - midnight) / 60).num_seconds() as usize / 60;
        debug_assert_eq!(midnight + TimeDelta::hours(lead as i64), first);
        for (h, (c, v)) in r.corrections().iter().zip(r.real_views()).enumerate() {
            let Some(slot) = lead.checked_add(h).filter(|&s| s < len) else {
                break;
            };
            views[slot] += v as f64;
            corrections[slot] += *c as f64;
            corrected[slot] += f64::from(u8::from(*c > 0));
        }
    }
    MidnightProfile {
        views: normalized(views),
        corrections: normalized(corrections),
        corrected_videos: normalized(corrected),
    }
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let max = v.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        v.iter_mut().for_each(|x| *x /= max);
    }
    v
}
