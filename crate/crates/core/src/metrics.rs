//! Corpus-level reconstruction errors.
//!
//! All four fractions pool every (video, hour) pair of the corpus before
//! dividing; per-video fractions are never averaged. Correction fractions are
//! normalized by total true correction mass, intervention fractions by the
//! number of true intervention slots (slots with a positive correction).

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::exec::Executor;
use crate::series::{CorrectionEstimate, GroundTruthSeries, ViewSeries};
use crate::{Error, Result};

/// Anything that turns an observed hourly series into correction estimates.
pub trait Estimator: Sync {
    fn estimate(&self, observed: &ViewSeries) -> CorrectionEstimate;
}

impl<F> Estimator for F
where
    F: Fn(&ViewSeries) -> CorrectionEstimate + Sync,
{
    fn estimate(&self, observed: &ViewSeries) -> CorrectionEstimate {
        self(observed)
    }
}

/// Reads only the visible negative deltas: `ĉ = max(0, -delta)`.
/// Missing slots estimate to zero.
pub fn naive_estimate(observed: &ViewSeries) -> CorrectionEstimate {
    CorrectionEstimate {
        video_id: observed.video_id().into(),
        estimates: observed
            .deltas()
            .iter()
            .map(|d| d.map_or(0, |d| (-d).max(0) as u64))
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Naive;

impl Estimator for Naive {
    fn estimate(&self, observed: &ViewSeries) -> CorrectionEstimate {
        naive_estimate(observed)
    }
}

/// Integer accumulators behind the four fractions. Merging is associative
/// and commutative, so the reduction order never matters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorTally {
    pub lost_mass: u64,
    pub added_mass: u64,
    pub true_mass: u64,
    pub missed_slots: u64,
    pub spurious_slots: u64,
    pub true_slots: u64,
}

impl ErrorTally {
    /// Tallies one aligned pair of slot sequences.
    pub fn from_slots(truth: &[u64], estimate: &[u64]) -> Self {
        debug_assert_eq!(truth.len(), estimate.len());
        let mut t = Self::default();
        for (&c, &e) in truth.iter().zip(estimate) {
            t.true_mass += c;
            if c > e {
                t.lost_mass += c - e;
            } else {
                t.added_mass += e - c;
            }
            if c > 0 {
                t.true_slots += 1;
                if e == 0 {
                    t.missed_slots += 1;
                }
            } else if e > 0 {
                t.spurious_slots += 1;
            }
        }
        t
    }

    pub fn merge(self, o: Self) -> Self {
        Self {
            lost_mass: self.lost_mass + o.lost_mass,
            added_mass: self.added_mass + o.added_mass,
            true_mass: self.true_mass + o.true_mass,
            missed_slots: self.missed_slots + o.missed_slots,
            spurious_slots: self.spurious_slots + o.spurious_slots,
            true_slots: self.true_slots + o.true_slots,
        }
    }

    pub fn lost_corrections(&self) -> Result<f64> {
        ratio(self.lost_mass, self.true_mass, "lost corrections")
    }

    pub fn added_corrections(&self) -> Result<f64> {
        ratio(self.added_mass, self.true_mass, "added corrections")
    }

    pub fn lost_interventions(&self) -> Result<f64> {
        ratio(self.missed_slots, self.true_slots, "lost interventions")
    }

    pub fn added_interventions(&self) -> Result<f64> {
        ratio(self.spurious_slots, self.true_slots, "added interventions")
    }

    pub fn report(&self) -> Result<ReconstructionReport> {
        Ok(ReconstructionReport {
            lost_corrections: self.lost_corrections()?,
            added_corrections: self.added_corrections()?,
            lost_interventions: self.lost_interventions()?,
            added_interventions: self.added_interventions()?,
            total_corrections: self.true_mass,
            total_intervention_slots: self.true_slots,
        })
    }
}

fn ratio(num: u64, den: u64, what: &'static str) -> Result<f64> {
    if den == 0 {
        return Err(Error::ZeroDenominator(what));
    }
    Ok(num as f64 / den as f64)
}

/// The four error fractions plus their denominators. `added_corrections`
/// is not clamped and may exceed 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub lost_corrections: f64,
    pub added_corrections: f64,
    pub lost_interventions: f64,
    pub added_interventions: f64,
    pub total_corrections: u64,
    pub total_intervention_slots: u64,
}

/// Tallies hourly truth against aligned estimates.
pub fn tally(truth: &[GroundTruthSeries], estimates: &[CorrectionEstimate]) -> Result<ErrorTally> {
    if truth.len() != estimates.len() {
        return Err(Error::CorpusMismatch {
            truth: truth.len(),
            estimates: estimates.len(),
        });
    }
    truth
        .iter()
        .zip(estimates)
        .try_fold(ErrorTally::default(), |acc, (t, e)| Ok(acc.merge(tally_video(t, e)?)))
}

/// Tallies one video after checking the estimate lines up with it.
pub fn tally_video(truth: &GroundTruthSeries, estimate: &CorrectionEstimate) -> Result<ErrorTally> {
    if truth.video_id() != estimate.video_id || truth.len() != estimate.estimates.len() {
        return Err(Error::Misaligned {
            video_id: truth.video_id().into(),
            expected: truth.len(),
            found: estimate.estimates.len(),
        });
    }
    Ok(ErrorTally::from_slots(truth.corrections(), &estimate.estimates))
}

pub fn lost_corrections(truth: &[GroundTruthSeries], est: &[CorrectionEstimate]) -> Result<f64> {
    tally(truth, est)?.lost_corrections()
}

pub fn added_corrections(truth: &[GroundTruthSeries], est: &[CorrectionEstimate]) -> Result<f64> {
    tally(truth, est)?.added_corrections()
}

pub fn lost_interventions(truth: &[GroundTruthSeries], est: &[CorrectionEstimate]) -> Result<f64> {
    tally(truth, est)?.lost_interventions()
}

pub fn added_interventions(truth: &[GroundTruthSeries], est: &[CorrectionEstimate]) -> Result<f64> {
    tally(truth, est)?.added_interventions()
}

/// Aggregates each truth series to hours, shows the estimator only the
/// observed hourly counter, and scores the result. Hourly truth is accepted
/// as-is.
pub fn evaluate<E, X>(truth: &[GroundTruthSeries], estimator: &E, exec: &X) -> Result<ReconstructionReport>
where
    E: Estimator + ?Sized,
    X: Executor,
{
    evaluate_tally(truth, estimator, exec)?.report()
}

pub fn evaluate_tally<E, X>(truth: &[GroundTruthSeries], estimator: &E, exec: &X) -> Result<ErrorTally>
where
    E: Estimator + ?Sized,
    X: Executor,
{
    let per_video: Vec<Result<ErrorTally>> = exec.map(truth, |t| {
        let hourly = t.to_hourly()?;
        let est = estimator.estimate(&hourly.observe());
        tally_video(&hourly, &est)
    });
    per_video
        .into_iter()
        .try_fold(ErrorTally::default(), |acc, t| Ok(acc.merge(t?)))
}
