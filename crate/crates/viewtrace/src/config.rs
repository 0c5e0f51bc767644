//! Flat TOML configuration files. Unknown keys are rejected; omitted keys
//! take their defaults.

use std::path::Path;

use anyhow::Context;
use chrono::FixedOffset;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use viewtrace_core::simgen::SimConfig;

use crate::error::DataError;
use crate::time::parse_zone;

/// Parses TOML text. Native TOML datetimes are accepted wherever a
/// timestamp string is expected.
pub fn from_toml<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| e.to_string())?;
    for (_, value) in table.iter_mut() {
        if let toml::Value::Datetime(d) = value {
            *value = toml::Value::String(d.to_string());
        }
    }
    table.try_into().map_err(|e: toml::de::Error| e.to_string())
}

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> anyhow::Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(from_toml(&text).map_err(|e| DataError::in_file(path, e))?)
}

pub fn load_sim(path: Option<&Path>) -> anyhow::Result<SimConfig> {
    let cfg: SimConfig = load(path)?;
    if let Err(e) = cfg.validate() {
        let where_ = path.map_or_else(|| Path::new("<defaults>").to_path_buf(), Path::to_path_buf);
        return Err(DataError::in_file(&where_, e).into());
    }
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectorConfig {
    pub requests_per_day: u32,
    pub poll_interval_minutes: u32,
    pub horizon_hours: u32,
    /// Fixed UTC offset of local time, e.g. "+01:00".
    pub timezone: String,
}

impl Default for CollectorConfig {
    fn default() -> Self {
        Self {
            requests_per_day: viewtrace_core::collector::DEFAULT_REQUESTS_PER_DAY,
            poll_interval_minutes: 60,
            horizon_hours: viewtrace_core::series::HOURLY_HORIZON as u32,
            timezone: "+01:00".into(),
        }
    }
}

impl CollectorConfig {
    pub fn zone(&self) -> Result<FixedOffset, String> {
        parse_zone(&self.timezone)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.poll_interval_minutes != 5 && self.poll_interval_minutes != 60 {
            return Err("poll_interval_minutes must be 5 or 60".into());
        }
        if self.requests_per_day == 0 {
            return Err("requests_per_day must be positive".into());
        }
        self.zone().map(|_| ())
    }
}
