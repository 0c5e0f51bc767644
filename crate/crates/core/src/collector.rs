//! Quota-aware polling of cumulative view totals.
//!
//! Jobs poll at `published_at + k * interval`. The poll falling in interval
//! `b` closes slot `b - 1`, so the stored series has the same slot layout as
//! an hourly aggregate. A skipped poll leaves its slot missing.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{NaiveDate, NaiveDateTime, TimeDelta};
use serde::{Deserialize, Serialize};

use crate::exec::Executor;
use crate::series::{GroundTruthSeries, Resolution, VideoMeta, ViewSeries, HOURLY_HORIZON};
use crate::{Error, Result};

pub const DEFAULT_REQUESTS_PER_DAY: u32 = 10_000;

/// Daily request allowance, reset at local midnight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuotaBudget {
    pub requests_per_day: u32,
    used_today: u32,
    day: NaiveDate,
}

impl QuotaBudget {
    pub fn new(requests_per_day: u32, now: NaiveDateTime) -> Self {
        Self {
            requests_per_day,
            used_today: 0,
            day: now.date(),
        }
    }

    pub fn day(&self) -> NaiveDate {
        self.day
    }

    pub fn used_today(&self) -> u32 {
        self.used_today
    }

    /// Requests still available at `now`, counting a pending reset.
    pub fn remaining_at(&self, now: NaiveDateTime) -> u32 {
        if now.date() > self.day {
            self.requests_per_day
        } else {
            self.requests_per_day - self.used_today
        }
    }

    fn roll_to(&mut self, now: NaiveDateTime) {
        if now.date() > self.day {
            self.day = now.date();
            self.used_today = 0;
        }
    }

    fn consume(&mut self, n: u32) {
        debug_assert!(self.used_today + n <= self.requests_per_day);
        self.used_today += n;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonitorJob {
    pub video_id: String,
    pub published_at: NaiveDateTime,
    pub poll_interval: TimeDelta,
    pub horizon: TimeDelta,
    pub next_poll_at: NaiveDateTime,
}

impl MonitorJob {
    /// Hourly polling for 170 hours from publication.
    pub fn new(meta: &VideoMeta) -> Self {
        Self::with_schedule(meta, TimeDelta::hours(1), TimeDelta::hours(HOURLY_HORIZON as i64))
    }

    pub fn with_schedule(meta: &VideoMeta, poll_interval: TimeDelta, horizon: TimeDelta) -> Self {
        assert!(poll_interval > TimeDelta::zero(), "poll interval must be positive");
        Self {
            video_id: meta.video_id.clone(),
            published_at: meta.published_at,
            poll_interval,
            horizon,
            next_poll_at: meta.published_at,
        }
    }

    pub fn is_active(&self) -> bool {
        self.next_poll_at <= self.published_at + self.horizon
    }

    pub fn is_due(&self, now: NaiveDateTime) -> bool {
        self.is_active() && self.next_poll_at <= now
    }

    // First grid point strictly after `now`.
    fn advance_past(&mut self, now: NaiveDateTime) {
        let step = self.poll_interval.num_seconds();
        let elapsed = (now - self.published_at).num_seconds().max(-1);
        let k = elapsed.div_euclid(step) + 1;
        self.next_poll_at = self.published_at + TimeDelta::seconds(k * step);
    }
}

/// Job indices chosen for one cycle, and the due jobs left without quota.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PollPlan {
    pub selected: Vec<usize>,
    pub deferred: Vec<usize>,
}

/// Due jobs ordered oldest-due first (ties by video id), cut at the quota
/// remaining at `now`.
pub fn plan_cycle(jobs: &[MonitorJob], budget: &QuotaBudget, now: NaiveDateTime) -> PollPlan {
    let mut due: Vec<usize> = (0..jobs.len()).filter(|&i| jobs[i].is_due(now)).collect();
    due.sort_by(|&a, &b| (jobs[a].next_poll_at, &jobs[a].video_id).cmp(&(jobs[b].next_poll_at, &jobs[b].video_id)));
    let take = (budget.remaining_at(now) as usize).min(due.len());
    let deferred = due.split_off(take);
    PollPlan {
        selected: due,
        deferred,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayLoad {
    pub served: u32,
    pub deferred: u32,
    pub failed: u32,
}

/// Polls skipped for lack of quota, by day and by video.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StarvationReport {
    pub days: BTreeMap<NaiveDate, DayLoad>,
    pub deferred_by_video: BTreeMap<String, u32>,
}

impl StarvationReport {
    pub fn total_deferred(&self) -> u64 {
        self.days.values().map(|d| u64::from(d.deferred)).sum()
    }

    pub fn total_served(&self) -> u64 {
        self.days.values().map(|d| u64::from(d.served)).sum()
    }

    pub fn is_starved(&self) -> bool {
        self.total_deferred() > 0
    }
}

#[derive(Debug, Clone)]
pub struct Scheduler {
    jobs: Vec<MonitorJob>,
    budget: QuotaBudget,
    report: StarvationReport,
}

impl Scheduler {
    pub fn new(budget: QuotaBudget) -> Self {
        Self {
            jobs: Vec::new(),
            budget,
            report: StarvationReport::default(),
        }
    }

    pub fn add_job(&mut self, job: MonitorJob) {
        self.jobs.push(job);
    }

    pub fn jobs(&self) -> &[MonitorJob] {
        &self.jobs
    }

    pub fn budget(&self) -> &QuotaBudget {
        &self.budget
    }

    pub fn report(&self) -> &StarvationReport {
        &self.report
    }

    /// Earliest pending poll over active jobs.
    pub fn next_due(&self) -> Option<NaiveDateTime> {
        self.jobs.iter().filter(|j| j.is_active()).map(|j| j.next_poll_at).min()
    }

    /// Plans a cycle at `now`, charges the quota and moves every due job to
    /// its next grid point. Returns the video ids to poll; each is issued
    /// once per grid point however long the fetch takes.
    pub fn tick(&mut self, now: NaiveDateTime) -> Vec<String> {
        self.budget.roll_to(now);
        let plan = plan_cycle(&self.jobs, &self.budget, now);
        self.budget.consume(plan.selected.len() as u32);
        let load = self.report.days.entry(now.date()).or_default();
        load.served += plan.selected.len() as u32;
        load.deferred += plan.deferred.len() as u32;
        for &i in &plan.deferred {
            *self
                .report
                .deferred_by_video
                .entry(self.jobs[i].video_id.clone())
                .or_default() += 1;
            self.jobs[i].advance_past(now);
        }
        plan.selected
            .iter()
            .map(|&i| {
                self.jobs[i].advance_past(now);
                self.jobs[i].video_id.clone()
            })
            .collect()
    }

    /// Restores a scheduler after a restart. Each job moves past its last
    /// logged poll and past `last_cycle`, when every due job was either
    /// served or deferred. The quota of `last_cycle`'s day is charged with
    /// what that day's report says was served.
    pub fn resume(&mut self, log: &[PollRecord], last_cycle: NaiveDateTime, report: StarvationReport) {
        let mut last: BTreeMap<&str, NaiveDateTime> = BTreeMap::new();
        for r in log {
            let e = last.entry(r.video_id.as_str()).or_insert(r.at);
            *e = (*e).max(r.at);
        }
        for job in &mut self.jobs {
            if let Some(&t) = last.get(job.video_id.as_str()) {
                job.advance_past(t);
            }
            if job.next_poll_at <= last_cycle {
                job.advance_past(last_cycle);
            }
        }
        self.budget.roll_to(last_cycle);
        let used = report.days.get(&last_cycle.date()).map_or(0, |d| d.served);
        self.budget.used_today = used.min(self.budget.requests_per_day);
        self.report = report;
    }

    fn note_failure(&mut self, now: NaiveDateTime) {
        self.report.days.entry(now.date()).or_default().failed += 1;
    }
}

/// One answered request: a cumulative total at an instant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PollRecord {
    pub video_id: String,
    pub at: NaiveDateTime,
    pub total: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PollOutcome {
    Baseline,
    /// Delta stored at `slot`.
    Delta {
        slot: usize,
        delta: i64,
    },
    /// Exact repeat of a recorded poll.
    Replay,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct VideoPolls {
    meta: VideoMeta,
    polls: Vec<(NaiveDateTime, u64)>,
}

/// Raw polls per video; compacts to observed series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PollStore {
    resolution: Resolution,
    videos: BTreeMap<String, VideoPolls>,
}

impl PollStore {
    pub fn new(resolution: Resolution) -> Self {
        Self {
            resolution,
            videos: BTreeMap::new(),
        }
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn register(&mut self, meta: VideoMeta) {
        self.videos.entry(meta.video_id.clone()).or_insert(VideoPolls {
            meta,
            polls: Vec::new(),
        });
    }

    pub fn len(&self) -> usize {
        self.videos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.videos.is_empty()
    }

    fn interval_of(&self, meta: &VideoMeta, at: NaiveDateTime) -> Option<usize> {
        let minutes = (at - meta.published_at).num_minutes();
        usize::try_from(minutes.div_euclid(self.resolution.slot_minutes())).ok()
    }

    pub fn record_poll(&mut self, video_id: &str, at: NaiveDateTime, total: u64) -> Result<PollOutcome> {
        let max = self.resolution.max_len();
        let resolution = self.resolution;
        let video = self
            .videos
            .get(video_id)
            .ok_or_else(|| Error::UnknownVideo(video_id.into()))?;
        let regression = || Error::TimestampRegression {
            video_id: video_id.into(),
            at: alloc::format!("{at}"),
        };
        let b = self.interval_of(&video.meta, at).ok_or_else(regression)?;
        if b > max {
            return Err(Error::TooLong {
                len: b,
                max,
                resolution,
            });
        }
        if let Ok(i) = video.polls.binary_search_by_key(&at, |p| p.0) {
            return if video.polls[i].1 == total {
                Ok(PollOutcome::Replay)
            } else {
                Err(Error::ConflictingPoll {
                    video_id: video_id.into(),
                    at: alloc::format!("{at}"),
                })
            };
        }
        if video.polls.last().is_some_and(|p| p.0 > at) {
            return Err(regression());
        }
        let earlier = video
            .polls
            .iter()
            .rev()
            .find(|p| self.interval_of(&video.meta, p.0).is_some_and(|pb| pb < b))
            .map(|p| p.1);
        let video = self.videos.get_mut(video_id).expect("checked above");
        video.polls.push((at, total));
        Ok(match earlier {
            None => PollOutcome::Baseline,
            Some(prev) => PollOutcome::Delta {
                slot: b - 1,
                delta: total as i64 - prev as i64,
            },
        })
    }

    /// Observed series of one video: the last poll in each interval closes
    /// the slot before it; slots without a closing poll are missing.
    pub fn compact(&self, video_id: &str) -> Result<ViewSeries> {
        let video = self
            .videos
            .get(video_id)
            .ok_or_else(|| Error::UnknownVideo(video_id.into()))?;
        let mut closing: BTreeMap<usize, u64> = BTreeMap::new();
        for &(at, total) in &video.polls {
            if let Some(b) = self.interval_of(&video.meta, at) {
                closing.insert(b, total);
            }
        }
        let len = closing.keys().next_back().copied().unwrap_or(0);
        let mut deltas = alloc::vec![None; len];
        let mut prev: Option<u64> = None;
        for (&b, &total) in &closing {
            if let Some(p) = prev {
                deltas[b - 1] = Some(total as i64 - p as i64);
            }
            prev = Some(total);
        }
        ViewSeries::new(video.meta.clone(), self.resolution, deltas)
    }

    /// Every registered video, in id order.
    pub fn compact_all(&self) -> Result<Vec<ViewSeries>> {
        self.videos.keys().map(|id| self.compact(id)).collect()
    }
}

/// Source of current cumulative totals.
pub trait Fetcher: Sync {
    fn fetch_total(&self, video_id: &str, at: NaiveDateTime) -> Result<u64>;
}

/// Answers polls from ground truth: the observed total of every slot that
/// has ended by the poll instant.
#[derive(Debug, Clone, Default)]
pub struct SimulatedFetcher {
    videos: BTreeMap<String, GroundTruthSeries>,
}

impl SimulatedFetcher {
    pub fn new(truth: impl IntoIterator<Item = GroundTruthSeries>) -> Self {
        Self {
            videos: truth.into_iter().map(|t| (t.video_id().into(), t)).collect(),
        }
    }
}

impl Fetcher for SimulatedFetcher {
    fn fetch_total(&self, video_id: &str, at: NaiveDateTime) -> Result<u64> {
        let t = self
            .videos
            .get(video_id)
            .ok_or_else(|| Error::UnknownVideo(video_id.into()))?;
        let res = t.resolution();
        let first = t.meta().first_slot_start(res);
        let ended = usize::try_from((at - first).num_minutes().div_euclid(res.slot_minutes()))
            .unwrap_or(0)
            .min(t.len());
        let total: i64 = t.views()[..ended]
            .iter()
            .zip(&t.corrections()[..ended])
            .map(|(&v, &c)| v as i64 - c as i64)
            .sum();
        Ok(total.max(0) as u64)
    }
}

/// Runs the scheduler's next cycle if it falls at or before `until`.
/// Fetches go through `exec`; quota and store updates stay on this thread.
/// Failed fetches count as lost polls.
pub fn run_cycle<F: Fetcher, X: Executor>(
    scheduler: &mut Scheduler,
    store: &mut PollStore,
    fetcher: &F,
    exec: &X,
    until: NaiveDateTime,
) -> Result<Option<Vec<PollRecord>>> {
    let Some(now) = scheduler.next_due().filter(|&t| t <= until) else {
        return Ok(None);
    };
    let ids = scheduler.tick(now);
    let fetched = exec.map(&ids, |id| fetcher.fetch_total(id, now));
    let mut records = Vec::with_capacity(ids.len());
    for (video_id, total) in ids.into_iter().zip(fetched) {
        match total {
            Ok(total) => {
                store.record_poll(&video_id, now, total)?;
                records.push(PollRecord {
                    video_id,
                    at: now,
                    total,
                });
            }
            Err(_) => scheduler.note_failure(now),
        }
    }
    Ok(Some(records))
}

/// Cycles until no poll is due at or before `until`.
pub fn run_until<F: Fetcher, X: Executor>(
    scheduler: &mut Scheduler,
    store: &mut PollStore,
    fetcher: &F,
    exec: &X,
    until: NaiveDateTime,
) -> Result<Vec<PollRecord>> {
    let mut all = Vec::new();
    while let Some(batch) = run_cycle(scheduler, store, fetcher, exec, until)? {
        all.extend(batch);
    }
    Ok(all)
}
