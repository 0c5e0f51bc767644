//! File formats, parallel execution and the command-line front end for
//! `viewtrace-core`.

pub mod cli;
pub mod collect;
pub mod config;
pub mod error;
pub mod exec;
pub mod figures;
pub mod io;
pub mod manifest;
pub mod model_io;
pub mod polllog;
pub mod report;
pub mod svg;
pub mod time;
pub mod training;

pub use error::{DataError, UsageError};
pub use exec::Parallel;
