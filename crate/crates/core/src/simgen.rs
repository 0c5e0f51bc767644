//! Synthetic five-minute ground truth.
//!
//! Each video's legitimate views follow a power-law decay from a burst scale,
//! modulated by a daily cycle, and are sampled as Poisson counts per
//! five-minute slot. Fake views are an assumption of this generator, not an
//! observation: they arrive at a rate `k * rate^gamma` (rate in views/hour,
//! `k` drawn once per channel), pile up in an outstanding pool, and leave it
//! through one daily correction pass per channel placed uniformly inside the
//! correction window, plus optional per-slot residual removals.
//!
//! Every video draws from its own ChaCha stream keyed by (seed, channel,
//! video), and every daily pass from a stream keyed by (seed, channel, day),
//! so output never depends on execution order.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{Datelike, NaiveDate, NaiveDateTime, TimeDelta, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::exec::Executor;
use crate::series::{GroundTruthSeries, Resolution, VideoMeta, SLOTS_PER_HOUR};
use crate::{Error, Result};

const CHANNEL_DOMAIN: u64 = 0x6368_616e;
const VIDEO_DOMAIN: u64 = 0x7669_6465;
const PASS_DOMAIN: u64 = 0x7061_7373;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub num_channels: u32,
    pub videos_per_channel: u32,
    /// Initial views/hour; each channel draws log-uniformly from this range.
    pub burst_scale_range: (f64, f64),
    /// Log-normal sigma of a video's burst scale around its channel's.
    pub video_scale_dispersion: f64,
    /// Power-law exponent of the view decay.
    pub decay_exponent: f64,
    pub circadian_amplitude: f64,
    pub circadian_peak_hour: f64,
    /// Exponent linking fake-view rate to legitimate-view rate.
    pub fake_rate_exponent: f64,
    /// Median per-channel fake-rate coefficient.
    pub fake_rate_coefficient: f64,
    /// Log-normal sigma of the per-channel coefficient.
    pub fake_rate_dispersion: f64,
    /// Hours of day `[start, end)` holding the daily correction pass.
    pub correction_window: (u32, u32),
    /// Fraction of the outstanding pool removed by each daily pass.
    pub daily_correction_completeness: f64,
    /// Per-slot removal probability of each outstanding fake view.
    pub residual_correction_rate: f64,
    /// Earliest publication time.
    pub start: NaiveDateTime,
    /// Videos are published uniformly over this many days after `start`.
    pub publication_span_days: u32,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            num_channels: 50,
            videos_per_channel: 20,
            burst_scale_range: (300.0, 30000.0),
            video_scale_dispersion: 0.5,
            decay_exponent: 1.0,
            circadian_amplitude: 0.3,
            circadian_peak_hour: 23.0,
            fake_rate_exponent: 1.06,
            fake_rate_coefficient: 0.05,
            fake_rate_dispersion: 0.5,
            correction_window: (16, 18),
            daily_correction_completeness: 0.9,
            residual_correction_rate: 0.0,
            start: NaiveDate::from_ymd_opt(2022, 2, 2)
                .unwrap()
                .and_hms_opt(0, 0, 0)
                .unwrap(),
            publication_span_days: 14,
            rng_seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParam(m.into()));
        let (lo, hi) = self.burst_scale_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return bad("burst_scale_range must be a positive, nonempty range");
        }
        if !(self.decay_exponent > 0.0 && self.fake_rate_exponent > 0.0) {
            return bad("decay and fake-rate exponents must be positive");
        }
        if !(0.0..1.0).contains(&self.circadian_amplitude) {
            return bad("circadian_amplitude must lie in [0, 1)");
        }
        if !(self.fake_rate_coefficient >= 0.0
            && self.fake_rate_dispersion >= 0.0
            && self.video_scale_dispersion >= 0.0)
        {
            return bad("fake-rate coefficient and dispersions must be nonnegative");
        }
        let (ws, we) = self.correction_window;
        if !(ws < we && we <= 24) {
            return bad("correction_window must be a nonempty range of hours within [0, 24)");
        }
        if !(0.0..=1.0).contains(&self.daily_correction_completeness)
            || !(0.0..=1.0).contains(&self.residual_correction_rate)
        {
            return bad("correction probabilities must lie in [0, 1]");
        }
        if self.publication_span_days == 0 {
            return bad("publication_span_days must be at least 1");
        }
        Ok(())
    }

    pub fn num_videos(&self) -> usize {
        self.num_channels as usize * self.videos_per_channel as usize
    }
}

fn stream_rng(seed: u64, domain: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream((a << 32) ^ b);
    rng
}

/// RNG stream of one video.
pub fn video_rng(seed: u64, channel: u32, video: u32) -> ChaCha8Rng {
    stream_rng(seed, VIDEO_DOMAIN, u64::from(channel), u64::from(video))
}

fn poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    if lambda <= 0.0 || !lambda.is_finite() {
        return 0;
    }
    Poisson::new(lambda).map_or(0, |d| d.sample(rng) as u64)
}

fn binomial<R: Rng + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).map_or(0, |d| d.sample(rng))
}

/// Per-channel draws shared by all of its videos.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelState {
    pub index: u32,
    pub channel_id: String,
    pub burst_scale: f64,
    pub fake_coefficient: f64,
    seed: u64,
}

impl ChannelState {
    pub fn new(config: &SimConfig, index: u32) -> Self {
        let mut rng = stream_rng(config.rng_seed, CHANNEL_DOMAIN, u64::from(index), 0);
        let (lo, hi) = config.burst_scale_range;
        let u: f64 = rng.random();
        let burst_scale = libm::exp(libm::log(lo) + u * (libm::log(hi) - libm::log(lo)));
        let z: f64 = rng.sample(StandardNormal);
        let fake_coefficient = config.fake_rate_coefficient * libm::exp(config.fake_rate_dispersion * z);
        Self {
            index,
            channel_id: format!("ch{index:04}"),
            burst_scale,
            fake_coefficient,
            seed: config.rng_seed,
        }
    }

    /// Start of the five-minute slot holding this channel's correction pass
    /// on `date`.
    pub fn correction_pass(&self, config: &SimConfig, date: NaiveDate) -> NaiveDateTime {
        let day = date.num_days_from_ce() as u64;
        let mut rng = stream_rng(self.seed, PASS_DOMAIN, u64::from(self.index), day);
        let (ws, we) = config.correction_window;
        let slots = (we - ws) * 12;
        let slot = rng.random_range(0..slots);
        date.and_hms_opt(ws + slot / 12, (slot % 12) * 5, 0).unwrap()
    }
}

/// One generated video with the generator's internal bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedVideo {
    pub truth: GroundTruthSeries,
    /// Fake views injected per slot (included in `truth.views()`).
    pub injected: Vec<u64>,
    /// Slots at which a daily correction pass ran.
    pub pass_slots: Vec<usize>,
}

/// Expected legitimate views/hour at `hours` after publication for a video
/// with burst scale `scale`, at hour-of-day `hod`.
pub fn view_rate(config: &SimConfig, scale: f64, hours: f64, hod: f64) -> f64 {
    let kernel = libm::pow(hours + 1.0, -config.decay_exponent);
    let phase = 2.0 * core::f64::consts::PI * (hod - config.circadian_peak_hour) / 24.0;
    scale * kernel * (1.0 + config.circadian_amplitude * libm::cos(phase))
}

pub fn generate_video<R: Rng + ?Sized>(
    config: &SimConfig,
    channel: &ChannelState,
    video_index: u32,
    rng: &mut R,
) -> SimulatedVideo {
    let n = Resolution::FiveMin.max_len();
    let span_slots = config.publication_span_days * 24 * 12;
    let published_at = config.start + TimeDelta::minutes(5 * i64::from(rng.random_range(0..span_slots)));
    let z: f64 = rng.sample(StandardNormal);
    let scale = channel.burst_scale * libm::exp(config.video_scale_dispersion * z);

    let mut views = Vec::with_capacity(n);
    let mut corrections = Vec::with_capacity(n);
    let mut injected = Vec::with_capacity(n);
    let mut pass_slots = Vec::new();
    let mut pool = 0u64;
    let mut pass: Option<(NaiveDate, NaiveDateTime)> = None;
    for t in 0..n {
        let wall = published_at + TimeDelta::minutes(5 * t as i64);
        let hod = f64::from(wall.hour()) + f64::from(wall.minute()) / 60.0;
        let rate = view_rate(config, scale, t as f64 / SLOTS_PER_HOUR as f64, hod);
        let real = poisson(rng, rate / SLOTS_PER_HOUR as f64);
        let fake = poisson(
            rng,
            channel.fake_coefficient * libm::pow(rate, config.fake_rate_exponent) / SLOTS_PER_HOUR as f64,
        );
        pool += fake;

        let date = wall.date();
        if pass.is_none_or(|(d, _)| d != date) {
            pass = Some((date, channel.correction_pass(config, date)));
        }
        let mut removed = 0;
        if pass.is_some_and(|(_, at)| at == wall) {
            removed = binomial(rng, pool, config.daily_correction_completeness);
            pass_slots.push(t);
        }
        removed += binomial(rng, pool - removed, config.residual_correction_rate);
        pool -= removed;

        views.push(real + fake);
        corrections.push(removed);
        injected.push(fake);
    }
    let meta = VideoMeta::new(
        format!("{}-v{video_index:04}", channel.channel_id),
        channel.channel_id.clone(),
        published_at,
    );
    SimulatedVideo {
        truth: GroundTruthSeries::new(meta, Resolution::FiveMin, views, corrections)
            .expect("generated series fit the five-minute horizon"),
        injected,
        pass_slots,
    }
}

/// Every video of the corpus with its bookkeeping, channel-major order.
pub fn generate_detailed<X: Executor>(config: &SimConfig, exec: &X) -> Result<Vec<SimulatedVideo>> {
    config.validate()?;
    let channels: Vec<ChannelState> = (0..config.num_channels).map(|c| ChannelState::new(config, c)).collect();
    let jobs: Vec<(u32, u32)> = (0..config.num_channels)
        .flat_map(|c| (0..config.videos_per_channel).map(move |v| (c, v)))
        .collect();
    Ok(exec.map(&jobs, |&(c, v)| {
        let mut rng = video_rng(config.rng_seed, c, v);
        generate_video(config, &channels[c as usize], v, &mut rng)
    }))
}

pub fn generate_corpus<X: Executor>(config: &SimConfig, exec: &X) -> Result<Vec<GroundTruthSeries>> {
    Ok(generate_detailed(config, exec)?.into_iter().map(|v| v.truth).collect())
}
