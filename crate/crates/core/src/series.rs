//! View series, ground truth and correction estimates.
//!
//! Slots are indexed from the publication slot. The wall-clock start of slot
//! `i` is the publication time floored to the slot grid plus `i` slots. All
//! timestamps are naive local time; converting from zoned input is the
//! caller's job.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::num::NonZeroU64;

use chrono::{NaiveDateTime, TimeDelta, Timelike};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Monitoring horizon in hours after publication.
pub const HOURLY_HORIZON: usize = 170;
/// Five-minute slots per hour.
pub const SLOTS_PER_HOUR: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Resolution {
    #[serde(rename = "hour")]
    Hour,
    #[serde(rename = "5min")]
    FiveMin,
}

impl Resolution {
    pub fn slot_minutes(self) -> i64 {
        match self {
            Resolution::Hour => 60,
            Resolution::FiveMin => 5,
        }
    }

    pub fn max_len(self) -> usize {
        match self {
            Resolution::Hour => HOURLY_HORIZON,
            Resolution::FiveMin => HOURLY_HORIZON * SLOTS_PER_HOUR,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Resolution::Hour => "hour",
            Resolution::FiveMin => "5min",
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identity and publication time of one video. IDs are opaque tokens.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VideoMeta {
    pub video_id: String,
    pub channel_id: String,
    pub published_at: NaiveDateTime,
}

impl VideoMeta {
    /// Builds metadata, truncating `published_at` to the minute.
    pub fn new(video_id: impl Into<String>, channel_id: impl Into<String>, published_at: NaiveDateTime) -> Self {
        let published_at = published_at
            .with_second(0)
            .and_then(|t| t.with_nanosecond(0))
            .unwrap_or(published_at);
        Self {
            video_id: video_id.into(),
            channel_id: channel_id.into(),
            published_at,
        }
    }

    /// Start of slot 0: publication time floored to the slot grid.
    pub fn first_slot_start(&self, resolution: Resolution) -> NaiveDateTime {
        let minute = i64::from(self.published_at.minute());
        let floored = minute - minute % resolution.slot_minutes();
        self.published_at - TimeDelta::minutes(minute - floored)
    }

    pub fn slot_start(&self, resolution: Resolution, slot: usize) -> NaiveDateTime {
        self.first_slot_start(resolution) + TimeDelta::minutes(resolution.slot_minutes() * slot as i64)
    }

    /// Hour of day (0..24) of an hourly slot.
    pub fn hour_of_day(&self, hour: usize) -> u8 {
        self.slot_start(Resolution::Hour, hour).hour() as u8
    }
}

fn check_len(len: usize, resolution: Resolution) -> Result<()> {
    if len > resolution.max_len() {
        return Err(Error::TooLong {
            len,
            max: resolution.max_len(),
            resolution,
        });
    }
    Ok(())
}

/// Observed per-slot changes of a public view counter. `None` marks a slot
/// that was never polled, which is distinct from a zero delta.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ViewSeries {
    meta: VideoMeta,
    resolution: Resolution,
    deltas: Vec<Option<i64>>,
}

impl ViewSeries {
    pub fn new(meta: VideoMeta, resolution: Resolution, deltas: Vec<Option<i64>>) -> Result<Self> {
        check_len(deltas.len(), resolution)?;
        let mut total = 0i64;
        for (slot, d) in deltas.iter().enumerate() {
            total += d.unwrap_or(0);
            if total < 0 {
                return Err(Error::NegativeTotal {
                    video_id: meta.video_id,
                    slot,
                });
            }
        }
        Ok(Self {
            meta,
            resolution,
            deltas,
        })
    }

    /// Convenience constructor for fully observed series.
    pub fn from_deltas(meta: VideoMeta, resolution: Resolution, deltas: &[i64]) -> Result<Self> {
        Self::new(meta, resolution, deltas.iter().copied().map(Some).collect())
    }

    pub fn meta(&self) -> &VideoMeta {
        &self.meta
    }

    pub fn video_id(&self) -> &str {
        &self.meta.video_id
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn deltas(&self) -> &[Option<i64>] {
        &self.deltas
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    /// Sums 12-slot groups of a five-minute series. An hour is missing only
    /// when all of its slots are.
    pub fn aggregate_to_hour(&self) -> Result<ViewSeries> {
        expect_resolution(self.resolution, Resolution::FiveMin)?;
        let deltas = self
            .deltas
            .chunks(SLOTS_PER_HOUR)
            .map(|chunk| {
                chunk
                    .iter()
                    .flatten()
                    .fold(None, |acc: Option<i64>, d| Some(acc.unwrap_or(0) + d))
            })
            .collect();
        Ok(ViewSeries {
            meta: self.meta.clone(),
            resolution: Resolution::Hour,
            deltas,
        })
    }
}

fn expect_resolution(found: Resolution, expected: Resolution) -> Result<()> {
    if found != expected {
        return Err(Error::WrongResolution { expected, found });
    }
    Ok(())
}

/// True views and true corrections per slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundTruthSeries {
    meta: VideoMeta,
    resolution: Resolution,
    views: Vec<u64>,
    corrections: Vec<u64>,
}

impl GroundTruthSeries {
    /// Validates that views and corrections align and fit the horizon.
    ///
    /// Corrections are not bounded by same-series views: a ground-truth
    /// window may start after views were already accrued.
    pub fn new(meta: VideoMeta, resolution: Resolution, views: Vec<u64>, corrections: Vec<u64>) -> Result<Self> {
        if views.len() != corrections.len() {
            return Err(Error::LengthMismatch {
                views: views.len(),
                corrections: corrections.len(),
            });
        }
        check_len(views.len(), resolution)?;
        Ok(Self {
            meta,
            resolution,
            views,
            corrections,
        })
    }

    pub fn meta(&self) -> &VideoMeta {
        &self.meta
    }

    pub fn video_id(&self) -> &str {
        &self.meta.video_id
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn views(&self) -> &[u64] {
        &self.views
    }

    pub fn corrections(&self) -> &[u64] {
        &self.corrections
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    /// Sums each run of 12 five-minute slots into one hour. A trailing
    /// partial hour is zero-padded.
    pub fn aggregate_to_hour(&self) -> Result<GroundTruthSeries> {
        expect_resolution(self.resolution, Resolution::FiveMin)?;
        let sum = |xs: &[u64]| -> Vec<u64> { xs.chunks(SLOTS_PER_HOUR).map(|c| c.iter().sum()).collect() };
        Ok(GroundTruthSeries {
            meta: self.meta.clone(),
            resolution: Resolution::Hour,
            views: sum(&self.views),
            corrections: sum(&self.corrections),
        })
    }

    /// Hourly view of this series: aggregates five-minute data, passes
    /// hourly data through.
    pub fn to_hourly(&self) -> Result<GroundTruthSeries> {
        match self.resolution {
            Resolution::Hour => Ok(self.clone()),
            Resolution::FiveMin => self.aggregate_to_hour(),
        }
    }

    /// The public counter as the platform exposes it: views minus corrections.
    pub fn observe(&self) -> ViewSeries {
        let deltas = self
            .views
            .iter()
            .zip(&self.corrections)
            .map(|(&v, &c)| Some(v as i64 - c as i64))
            .collect();
        ViewSeries {
            meta: self.meta.clone(),
            resolution: self.resolution,
            deltas,
        }
    }

    pub fn interventions(&self) -> impl Iterator<Item = InterventionEvent> + '_ {
        interventions(&self.meta.video_id, &self.corrections)
    }
}

/// Free-function spelling of [`GroundTruthSeries::aggregate_to_hour`].
pub fn aggregate_to_hour(series: &GroundTruthSeries) -> Result<GroundTruthSeries> {
    series.aggregate_to_hour()
}

/// Free-function spelling of [`GroundTruthSeries::observe`].
pub fn observe(truth: &GroundTruthSeries) -> ViewSeries {
    truth.observe()
}

/// Reconstructed correction magnitudes, aligned with a series' slots.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionEstimate {
    pub video_id: String,
    pub estimates: Vec<u64>,
}

impl CorrectionEstimate {
    pub fn zeros(video_id: impl Into<String>, len: usize) -> Self {
        Self {
            video_id: video_id.into(),
            estimates: alloc::vec![0; len],
        }
    }

    pub fn total(&self) -> u64 {
        self.estimates.iter().sum()
    }

    pub fn interventions(&self) -> impl Iterator<Item = InterventionEvent> + '_ {
        interventions(&self.video_id, &self.estimates)
    }
}

/// One slot with a positive correction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterventionEvent {
    pub video_id: String,
    pub hour_index: usize,
    pub magnitude: NonZeroU64,
}

fn interventions<'a>(video_id: &'a str, corrections: &'a [u64]) -> impl Iterator<Item = InterventionEvent> + 'a {
    corrections.iter().enumerate().filter_map(move |(i, &c)| {
        NonZeroU64::new(c).map(|magnitude| InterventionEvent {
            video_id: video_id.into(),
            hour_index: i,
            magnitude,
        })
    })
}
