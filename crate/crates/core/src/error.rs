use alloc::string::String;

use crate::series::Resolution;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("expected {expected} resolution, got {found}")]
    WrongResolution { expected: Resolution, found: Resolution },
    #[error("series of {len} slots exceeds the {max}-slot limit at {resolution} resolution")]
    TooLong {
        len: usize,
        max: usize,
        resolution: Resolution,
    },
    #[error("views ({views}) and corrections ({corrections}) differ in length")]
    LengthMismatch { views: usize, corrections: usize },
    #[error("cumulative view count of video {video_id} is negative at slot {slot}")]
    NegativeTotal { video_id: String, slot: usize },
    #[error("{0} is undefined: zero denominator")]
    ZeroDenominator(&'static str),
    #[error("estimate for {video_id} does not align with its series (expected {expected} slots, found {found})")]
    Misaligned {
        video_id: String,
        expected: usize,
        found: usize,
    },
    #[error("corpus sizes differ: {truth} series vs {estimates} estimates")]
    CorpusMismatch { truth: usize, estimates: usize },
    #[error("hour {hour} is out of range for a series of {len} slots")]
    HourOutOfRange { hour: usize, len: usize },
    #[error("training data contains a single class")]
    SingleClass,
    #[error("labels ({labels}) and predictions ({predictions}) differ in length")]
    PredictionLength { labels: usize, predictions: usize },
    #[error("F1 is undefined without any positive label or prediction")]
    NoPositives,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("regression needs at least 3 usable points, got {0}")]
    TooFewPoints(usize),
    #[error("regressor has zero variance")]
    ZeroVariance,
    #[error("distribution has zero total mass")]
    ZeroMass,
    #[error("unknown video {0}")]
    UnknownVideo(String),
    #[error("poll for {video_id} at {at} precedes the previous poll")]
    TimestampRegression { video_id: String, at: String },
    #[error("poll for {video_id} at {at} conflicts with an earlier poll of the same slot")]
    ConflictingPoll { video_id: String, at: String },
}
