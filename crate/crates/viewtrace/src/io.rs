//! JSON-lines corpora: one video per line.
//!
//! Observed: `{"video_id","channel_id","published_at","resolution","deltas"}`
//! with `null` for a missing slot. Ground truth carries `views` and
//! `corrections` instead of `deltas`. Estimates: `{"video_id","estimates"}`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use chrono::FixedOffset;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use viewtrace_core::series::{CorrectionEstimate, GroundTruthSeries, Resolution, VideoMeta, ViewSeries};

use crate::error::DataError;
use crate::time::{format_timestamp, parse_timestamp};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeriesRecord {
    video_id: String,
    channel_id: String,
    published_at: String,
    resolution: Resolution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    deltas: Option<Vec<Option<i64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    views: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    corrections: Option<Vec<u64>>,
}

/// A corpus line of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Series {
    Observed(ViewSeries),
    Truth(GroundTruthSeries),
}

impl Series {
    pub fn meta(&self) -> &VideoMeta {
        match self {
            Series::Observed(s) => s.meta(),
            Series::Truth(t) => t.meta(),
        }
    }

    /// Hourly observed series; ground truth is aggregated and observed.
    pub fn hourly_observed(&self) -> viewtrace_core::Result<ViewSeries> {
        match self {
            Series::Observed(s) if s.resolution() == Resolution::FiveMin => s.aggregate_to_hour(),
            Series::Observed(s) => Ok(s.clone()),
            Series::Truth(t) => Ok(t.to_hourly()?.observe()),
        }
    }
}

fn record_to_series(rec: SeriesRecord, zone: FixedOffset) -> Result<Series, String> {
    let published_at = parse_timestamp(&rec.published_at, zone)?;
    let meta = VideoMeta::new(rec.video_id, rec.channel_id, published_at);
    match (rec.deltas, rec.views, rec.corrections) {
        (Some(deltas), None, None) => ViewSeries::new(meta, rec.resolution, deltas)
            .map(Series::Observed)
            .map_err(|e| e.to_string()),
        (None, Some(views), Some(corrections)) => GroundTruthSeries::new(meta, rec.resolution, views, corrections)
            .map(Series::Truth)
            .map_err(|e| e.to_string()),
        _ => Err("expected either \"deltas\" or both \"views\" and \"corrections\"".into()),
    }
}

fn meta_fields(meta: &VideoMeta, resolution: Resolution) -> SeriesRecord {
    SeriesRecord {
        video_id: meta.video_id.clone(),
        channel_id: meta.channel_id.clone(),
        published_at: format_timestamp(meta.published_at),
        resolution,
        deltas: None,
        views: None,
        corrections: None,
    }
}

fn series_to_record(series: &Series) -> SeriesRecord {
    match series {
        Series::Observed(s) => SeriesRecord {
            deltas: Some(s.deltas().to_vec()),
            ..meta_fields(s.meta(), s.resolution())
        },
        Series::Truth(t) => SeriesRecord {
            views: Some(t.views().to_vec()),
            corrections: Some(t.corrections().to_vec()),
            ..meta_fields(t.meta(), t.resolution())
        },
    }
}

/// Reads one JSON value per nonblank line, reporting `path:line` on failure.
pub fn read_jsonl<T, F>(path: &Path, mut convert: F) -> anyhow::Result<Vec<T>>
where
    F: FnMut(&str) -> Result<T, String>,
{
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(convert(&line).map_err(|m| DataError::at_line(path, i + 1, m))?);
    }
    Ok(out)
}

fn parse_json<T: DeserializeOwned>(line: &str) -> Result<T, String> {
    serde_json::from_str(line).map_err(|e| e.to_string())
}

pub fn read_series(path: &Path, zone: FixedOffset) -> anyhow::Result<Vec<Series>> {
    read_jsonl(path, |line| record_to_series(parse_json(line)?, zone))
}

/// Ground-truth corpus; observed lines are rejected.
pub fn read_truth(path: &Path, zone: FixedOffset) -> anyhow::Result<Vec<GroundTruthSeries>> {
    read_jsonl(path, |line| match record_to_series(parse_json(line)?, zone)? {
        Series::Truth(t) => Ok(t),
        Series::Observed(_) => Err("ground truth required, found an observed series".into()),
    })
}

/// Hourly observed series from a file of either kind.
pub fn read_hourly_observed(path: &Path, zone: FixedOffset) -> anyhow::Result<Vec<ViewSeries>> {
    read_jsonl(path, |line| {
        record_to_series(parse_json(line)?, zone)?
            .hourly_observed()
            .map_err(|e| e.to_string())
    })
}

pub fn read_estimates(path: &Path) -> anyhow::Result<Vec<CorrectionEstimate>> {
    read_jsonl(path, parse_json)
}

pub fn write_jsonl<T, I>(path: &Path, items: I) -> anyhow::Result<()>
where
    T: Serialize,
    I: IntoIterator<Item = T>,
{
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_series<'a, I: IntoIterator<Item = &'a Series>>(path: &Path, series: I) -> anyhow::Result<()> {
    write_jsonl(path, series.into_iter().map(series_to_record))
}

pub fn write_truth(path: &Path, truth: &[GroundTruthSeries]) -> anyhow::Result<()> {
    write_jsonl(path, truth.iter().map(|t| series_to_record(&Series::Truth(t.clone()))))
}

pub fn write_observed(path: &Path, observed: &[ViewSeries]) -> anyhow::Result<()> {
    write_jsonl(
        path,
        observed.iter().map(|s| series_to_record(&Series::Observed(s.clone()))),
    )
}

pub fn write_estimates(path: &Path, estimates: &[CorrectionEstimate]) -> anyhow::Result<()> {
    write_jsonl(path, estimates)
}
