//! Reconstruction of platform view-count corrections from coarsely sampled
//! view telemetry.
//!
//! The crate is `no_std` (with `alloc`). Everything here is a pure function
//! over immutable series; IO, file formats and parallel execution live in the
//! `viewtrace` companion crate, which plugs a thread pool in through
//! [`exec::Executor`].
//!
//! Module map:
//!
//! - [`series`]: view series, ground truth, estimates, aggregation.
//! - [`simgen`]: synthetic ground-truth corpora.
//! - [`metrics`]: lost/added corrections and interventions.
//! - [`benchmark`]: the neighbor-window heuristic estimator.
//! - [`classifier`]: features, gradient-boosted trees, tuning, reconstruction.
//! - [`analyze`]: concentration, rhythms, timing and log-log regression.
//! - [`collector`]: quota-aware poll scheduling and poll ingestion.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analyze;
pub mod benchmark;
pub mod classifier;
pub mod collector;
mod error;
pub mod exec;
pub mod metrics;
pub mod series;
pub mod simgen;

pub use error::{Error, Result};
