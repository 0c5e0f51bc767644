//! Simulated collection runs backed by an append-only poll log.
//!
//! Next to the log sits `<log>.state.json` with the time of the last cycle
//! and the starvation report, so a restarted run continues where the
//! previous one stopped.

use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::{NaiveDateTime, TimeDelta};
use serde::{Deserialize, Serialize};
use viewtrace_core::collector::{
    run_cycle, MonitorJob, PollRecord, PollStore, QuotaBudget, Scheduler, SimulatedFetcher, StarvationReport,
};
use viewtrace_core::exec::Executor;
use viewtrace_core::series::{GroundTruthSeries, Resolution, ViewSeries};

use crate::config::CollectorConfig;
use crate::error::DataError;
use crate::polllog::PollLog;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollectorState {
    pub last_cycle: NaiveDateTime,
    pub report: StarvationReport,
}

pub fn state_path(log: &Path) -> PathBuf {
    let mut name = log.file_name().unwrap_or_default().to_os_string();
    name.push(".state.json");
    log.with_file_name(name)
}

fn read_state(path: &Path) -> anyhow::Result<Option<CollectorState>> {
    match std::fs::read_to_string(path) {
        Ok(text) => serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| DataError::in_file(path, e).into()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e).with_context(|| format!("reading {}", path.display())),
    }
}

fn write_state(path: &Path, state: &CollectorState) -> anyhow::Result<()> {
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, serde_json::to_vec_pretty(state)?)?;
    std::fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))
}

pub struct Collector {
    pub scheduler: Scheduler,
    pub store: PollStore,
    fetcher: SimulatedFetcher,
    log: PollLog,
    state_path: PathBuf,
    last_cycle: Option<NaiveDateTime>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CycleSummary {
    pub cycles: usize,
    pub polls: usize,
    pub replayed: usize,
}

impl Collector {
    /// Sets up jobs for every video of `truth` and replays an existing log.
    pub fn open(
        truth: Vec<GroundTruthSeries>,
        config: &CollectorConfig,
        log_path: &Path,
    ) -> anyhow::Result<(Self, usize)> {
        let zone = config.zone().map_err(crate::error::usage)?;
        let resolution = match config.poll_interval_minutes {
            5 => Resolution::FiveMin,
            60 => Resolution::Hour,
            m => return Err(crate::error::usage(format!("unsupported poll interval {m}"))),
        };
        let start = truth
            .iter()
            .map(|t| t.meta().published_at)
            .min()
            .ok_or_else(|| anyhow::anyhow!("no videos to monitor"))?;
        let mut scheduler = Scheduler::new(QuotaBudget::new(config.requests_per_day, start));
        let mut store = PollStore::new(resolution);
        for t in &truth {
            scheduler.add_job(MonitorJob::with_schedule(
                t.meta(),
                TimeDelta::minutes(i64::from(config.poll_interval_minutes)),
                TimeDelta::hours(i64::from(config.horizon_hours)),
            ));
            store.register(t.meta().clone());
        }

        let (log, records) = PollLog::open(log_path, zone)?;
        for (i, r) in records.iter().enumerate() {
            store
                .record_poll(&r.video_id, r.at, r.total)
                .map_err(|e| DataError::in_file(log_path, format!("record {}: {e}", i + 1)))?;
        }
        let state_path = state_path(log_path);
        let state = read_state(&state_path)?;
        let last_cycle = match (&state, records.iter().map(|r| r.at).max()) {
            (Some(s), Some(t)) => Some(s.last_cycle.max(t)),
            (Some(s), None) => Some(s.last_cycle),
            (None, t) => t,
        };
        if let Some(last) = last_cycle {
            let report = state.map(|s| s.report).unwrap_or_else(|| served_from_log(&records));
            scheduler.resume(&records, last, report);
        }
        Ok((
            Self {
                scheduler,
                store,
                fetcher: SimulatedFetcher::new(truth),
                log,
                state_path,
                last_cycle,
            },
            records.len(),
        ))
    }

    /// Runs one cycle; false once nothing is left to poll.
    pub fn step<X: Executor>(&mut self, exec: &X) -> anyhow::Result<Option<usize>> {
        let Some(now) = self.scheduler.next_due() else {
            return Ok(None);
        };
        let records: Vec<PollRecord> =
            run_cycle(&mut self.scheduler, &mut self.store, &self.fetcher, exec, now)?.unwrap_or_default();
        self.log.append(&records)?;
        self.last_cycle = Some(now);
        write_state(
            &self.state_path,
            &CollectorState {
                last_cycle: now,
                report: self.scheduler.report().clone(),
            },
        )?;
        Ok(Some(records.len()))
    }

    pub fn run<X: Executor>(&mut self, exec: &X, all: bool) -> anyhow::Result<CycleSummary> {
        let mut summary = CycleSummary::default();
        while let Some(n) = self.step(exec)? {
            summary.cycles += 1;
            summary.polls += n;
            if !all {
                break;
            }
        }
        Ok(summary)
    }

    pub fn last_cycle(&self) -> Option<NaiveDateTime> {
        self.last_cycle
    }

    pub fn observed(&self) -> anyhow::Result<Vec<ViewSeries>> {
        Ok(self.store.compact_all()?)
    }
}

fn served_from_log(records: &[PollRecord]) -> StarvationReport {
    let mut report = StarvationReport::default();
    for r in records {
        report.days.entry(r.at.date()).or_default().served += 1;
    }
    report
}
