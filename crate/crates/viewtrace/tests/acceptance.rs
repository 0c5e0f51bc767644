//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints one `criterion N: PASS|FAIL ...` line; the process
//! fails if any criterion does.

use std::sync::OnceLock;
use std::time::Instant;

use chrono::{NaiveDate, NaiveDateTime, TimeDelta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use viewtrace::io::write_observed;
use viewtrace::polllog::{read_log, PollLog};
use viewtrace::training::{Prepared, DEFAULT_TEST_FRACTION};
use viewtrace::Parallel;
use viewtrace_core::analyze::{
    channel_totals_from_truth, corrections_vs_popularity, hourly_rhythm, loglog_regression, lorenz, pair_up, peak_hour,
    RhythmQuantity,
};
use viewtrace_core::benchmark::{benchmark_estimate, window_sweep, Benchmark, Statistic, WindowSpec};
use viewtrace_core::classifier::{ModelParams, ParamGrid, Reconstructor};
use viewtrace_core::collector::{
    run_cycle, MonitorJob, PollRecord, PollStore, QuotaBudget, Scheduler, SimulatedFetcher, DEFAULT_REQUESTS_PER_DAY,
};
use viewtrace_core::metrics::{evaluate, naive_estimate, tally, Naive, ReconstructionReport};
use viewtrace_core::series::{CorrectionEstimate, GroundTruthSeries, Resolution, VideoMeta};
use viewtrace_core::simgen::{generate_corpus, SimConfig};

fn exec() -> &'static Parallel {
    static EXEC: OnceLock<Parallel> = OnceLock::new();
    EXEC.get_or_init(|| Parallel::new(None).unwrap())
}

fn default_corpus() -> &'static [GroundTruthSeries] {
    static CORPUS: OnceLock<Vec<GroundTruthSeries>> = OnceLock::new();
    CORPUS.get_or_init(|| generate_corpus(&SimConfig::default(), exec()).unwrap())
}

type Outcome = (bool, String);

fn within(t0: Instant, seconds: u64) -> bool {
    t0.elapsed().as_secs() < seconds
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

// Independent oracle: nested loops over videos and slots, integer tallies.
fn oracle(truth: &[GroundTruthSeries], est: &[CorrectionEstimate]) -> [Option<(u64, u64)>; 4] {
    let (mut lost, mut added, mut mass) = (0u64, 0u64, 0u64);
    let (mut missed, mut spurious, mut slots) = (0u64, 0u64, 0u64);
    for i in 0..truth.len() {
        let c = truth[i].corrections();
        let e = &est[i].estimates;
        for h in 0..c.len() {
            mass += c[h];
            if c[h] > e[h] {
                lost += c[h] - e[h];
            }
            if e[h] > c[h] {
                added += e[h] - c[h];
            }
            if c[h] > 0 {
                slots += 1;
            }
            if c[h] > 0 && e[h] == 0 {
                missed += 1;
            }
            if c[h] == 0 && e[h] > 0 {
                spurious += 1;
            }
        }
    }
    let frac = |n: u64, d: u64| (d > 0).then_some((n, d));
    [
        frac(lost, mass),
        frac(added, mass),
        frac(missed, slots),
        frac(spurious, slots),
    ]
}

fn random_corpus(rng: &mut ChaCha8Rng) -> Vec<GroundTruthSeries> {
    let base = NaiveDate::from_ymd_opt(2021, 3, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    (0..rng.random_range(1..=10))
        .map(|i| {
            let len = rng.random_range(1..=12);
            let views: Vec<u64> = (0..len).map(|_| rng.random_range(0..=60)).collect();
            let corrections: Vec<u64> = (0..len)
                .map(|_| {
                    if rng.random_bool(0.4) {
                        rng.random_range(1..=20)
                    } else {
                        0
                    }
                })
                .collect();
            let meta = VideoMeta::new(
                format!("v{i}"),
                "c",
                base + TimeDelta::minutes(rng.random_range(0..2000)),
            );
            GroundTruthSeries::new(meta, Resolution::Hour, views, corrections).unwrap()
        })
        .collect()
}

fn criterion_1_metric_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = 0;
    let mut compared = 0;
    for _ in 0..200 {
        let truth = random_corpus(&mut rng);
        let random: Vec<CorrectionEstimate> = truth
            .iter()
            .map(|t| CorrectionEstimate {
                video_id: t.video_id().into(),
                estimates: (0..t.len())
                    .map(|_| {
                        if rng.random_bool(0.5) {
                            rng.random_range(0..=25)
                        } else {
                            0
                        }
                    })
                    .collect(),
            })
            .collect();
        let observed: Vec<_> = truth.iter().map(|t| t.observe()).collect();
        let naive: Vec<_> = observed.iter().map(naive_estimate).collect();
        let bench: Vec<_> = observed
            .iter()
            .map(|o| benchmark_estimate(o, &WindowSpec::default()))
            .collect();
        for est in [&random, &naive, &bench] {
            let t = tally(&truth, est).unwrap();
            let got = [
                t.lost_corrections().ok(),
                t.added_corrections().ok(),
                t.lost_interventions().ok(),
                t.added_interventions().ok(),
            ];
            let want = oracle(&truth, est);
            let ints = [
                (t.lost_mass, t.true_mass),
                (t.added_mass, t.true_mass),
                (t.missed_slots, t.true_slots),
                (t.spurious_slots, t.true_slots),
            ];
            for k in 0..4 {
                compared += 1;
                let same = match want[k] {
                    Some((n, d)) => ints[k] == (n, d) && got[k] == Some(n as f64 / d as f64),
                    None => got[k].is_none(),
                };
                mismatches += usize::from(!same);
            }
        }
    }
    let elapsed = t0.elapsed();
    let pass = mismatches == 0 && within(t0, 10);
    (
        pass,
        format!("{mismatches} mismatches in {compared} fractions, {elapsed:.2?}"),
    )
}

struct Scored {
    naive: ReconstructionReport,
    bench: ReconstructionReport,
    model: ReconstructionReport,
    full_naive: ReconstructionReport,
    full_bench: ReconstructionReport,
}

fn scored() -> &'static Scored {
    static SCORED: OnceLock<Scored> = OnceLock::new();
    SCORED.get_or_init(|| {
        let truth = default_corpus();
        let prep = Prepared::new(truth, DEFAULT_TEST_FRACTION, 0).unwrap();
        let model = prep.train(&ModelParams::default()).unwrap();
        let held = prep.test_truth(truth);
        let window = WindowSpec::default();
        let rec = Reconstructor { model, window };
        Scored {
            naive: evaluate(&held, &Naive, exec()).unwrap(),
            bench: evaluate(&held, &Benchmark(window), exec()).unwrap(),
            model: evaluate(&held, &rec, exec()).unwrap(),
            full_naive: evaluate(truth, &Naive, exec()).unwrap(),
            full_bench: evaluate(truth, &Benchmark(window), exec()).unwrap(),
        }
    })
}

fn criterion_2_table_ordering() -> Outcome {
    let t0 = Instant::now();
    let s = scored();
    let ordered =
        s.naive.lost_corrections > s.bench.lost_corrections && s.bench.lost_corrections > s.model.lost_corrections;
    let full_ordered = s.full_naive.lost_corrections > s.full_bench.lost_corrections;
    let small_added = s.full_bench.added_corrections <= 0.05 && s.model.added_interventions <= 0.05;
    let pass = ordered && full_ordered && small_added && default_corpus().len() >= 1000 && within(t0, 600);
    (
        pass,
        format!(
            "held-out lost corrections naive {} > benchmark {} > model {}; corpus naive {} > benchmark {}; \
             benchmark added corrections {}; model added interventions {} ({} videos, {:.1?})",
            pct(s.naive.lost_corrections),
            pct(s.bench.lost_corrections),
            pct(s.model.lost_corrections),
            pct(s.full_naive.lost_corrections),
            pct(s.full_bench.lost_corrections),
            pct(s.full_bench.added_corrections),
            pct(s.model.added_interventions),
            default_corpus().len(),
            t0.elapsed(),
        ),
    )
}

fn criterion_3_window_sweep() -> Outcome {
    let t0 = Instant::now();
    let rows = window_sweep(
        default_corpus(),
        &[1, 2, 3, 4, 5, 6],
        &[Statistic::Minimum, Statistic::Mean],
        exec(),
    )
    .unwrap();
    let best = rows
        .iter()
        .min_by(|a, b| a.report.lost_corrections.total_cmp(&b.report.lost_corrections))
        .unwrap();
    let one_hour_min = rows.iter().find(|r| r.window == WindowSpec::default()).unwrap();
    let gap = one_hour_min.report.lost_corrections - best.report.lost_corrections;
    let pass = gap <= 0.02 && within(t0, 900);
    (
        pass,
        format!(
            "1h-minimum {} vs best {} at {}: gap {:.2}pp ({:.1?})",
            pct(one_hour_min.report.lost_corrections),
            pct(best.report.lost_corrections),
            best.window,
            100.0 * gap,
            t0.elapsed()
        ),
    )
}

fn criterion_4_regression() -> Outcome {
    let t0 = Instant::now();
    let cfg = SimConfig::default();
    let totals = channel_totals_from_truth(default_corpus());
    let points: Vec<(f64, f64)> = totals.values().map(|&(v, c)| (v as f64, c as f64)).collect();
    let fit = loglog_regression(&points).unwrap();
    let (lo, hi) = fit.slope_ci_95;
    let recovered = lo <= cfg.fake_rate_exponent && cfg.fake_rate_exponent <= hi;

    let exact: Vec<(f64, f64)> = (0..25)
        .map(|i| {
            let v = 10f64.powf(2.0 + 0.2 * f64::from(i));
            (v, 58.94 * v.powf(1.0574))
        })
        .collect();
    let e = loglog_regression(&exact).unwrap();
    let exact_ok =
        (e.slope - 1.0574).abs() <= 1e-9 && (e.intercept - 1.7704).abs() <= 1e-4 && (e.r_squared - 1.0).abs() <= 1e-12;
    let pass = recovered && exact_ok && within(t0, 60);
    (pass, format!(
            "slope {:.4} CI [{lo:.4}, {hi:.4}] vs {} over {} channels; exact input slope {:.12} intercept {:.6} R2 {:.15} ({:.1?})",
            fit.slope,
            cfg.fake_rate_exponent,
            fit.n,
            e.slope,
            e.intercept,
            e.r_squared,
            t0.elapsed()
        ),
    )
}

fn criterion_5_classifier() -> Outcome {
    let t0 = Instant::now();
    let truth = default_corpus();
    let prep = Prepared::new(truth, DEFAULT_TEST_FRACTION, 0).unwrap();
    let grid = ParamGrid::standard();
    let cv = prep.tune(&grid, 5, exec()).unwrap();
    let full_grid = cv.table.len() == 27 && cv.table.iter().all(|r| r.fold_f1.len() == 5);

    let best_row = cv.table.iter().find(|r| r.params == cv.best).unwrap();
    let base = ModelParams {
        decision_threshold: ModelParams::default().decision_threshold,
        ..cv.best.clone()
    };
    let again = prep.tune(&ParamGrid::single(base), 5, exec()).unwrap();
    let deterministic = again.table[0] == *best_row;

    let model = prep.train(&cv.best).unwrap();
    let f1 = prep.heldout_f1(&model).unwrap();
    let pass = full_grid && deterministic && f1 >= 0.6 && within(t0, 1200);
    (pass, format!(
            "{} grid points x 5 folds; best depth {} lr {} l1 {} threshold {} (CV F1 {:.3}); rerun identical: {deterministic}; held-out F1 {f1:.3} ({:.1?})",
            cv.table.len(),
            cv.best.max_depth,
            cv.best.learning_rate,
            cv.best.l1_regularization,
            cv.best.decision_threshold,
            best_row.mean_f1,
            t0.elapsed()
        ),
    )
}

fn criterion_6_analysis_invariants() -> Outcome {
    let t0 = Instant::now();
    let even = lorenz(&[1.0; 4]).unwrap().gini;
    let single = lorenz(&[0.0, 0.0, 0.0, 5.0]).unwrap().gini;

    let cfg = SimConfig::default();
    let hourly: Vec<GroundTruthSeries> = default_corpus().iter().map(|t| t.to_hourly().unwrap()).collect();
    let observed: Vec<_> = hourly.iter().map(|t| t.observe()).collect();
    let truth_est: Vec<CorrectionEstimate> = hourly
        .iter()
        .map(|t| CorrectionEstimate {
            video_id: t.video_id().into(),
            estimates: t.corrections().to_vec(),
        })
        .collect();
    let bench_est: Vec<_> = observed
        .iter()
        .map(|o| benchmark_estimate(o, &WindowSpec::default()))
        .collect();

    let percentiles: Vec<f64> = (0..=20).map(|i| f64::from(i) / 20.0).collect();
    let mut monotone = true;
    for est in [&truth_est, &bench_est] {
        let corpus = pair_up(&observed, est).unwrap();
        let t = corrections_vs_popularity(&corpus, &percentiles).unwrap();
        monotone &= t.fraction_before.windows(2).all(|w| w[0] <= w[1]);
    }

    let corpus = pair_up(&observed, &truth_est).unwrap();
    let corr_peak = peak_hour(&hourly_rhythm(&corpus, RhythmQuantity::Corrections)).unwrap();
    let view_peak = peak_hour(&hourly_rhythm(&corpus, RhythmQuantity::Views)).unwrap();
    let (w0, w1) = cfg.correction_window;
    let inside = |h: u8| (w0..=w1).contains(&u32::from(h));

    let pass = even == 0.0 && single == 0.75 && monotone && inside(corr_peak) && !inside(view_peak) && within(t0, 120);
    (pass, format!(
            "gini even {even} single {single}; timing monotone {monotone}; correction peak {corr_peak}h, view peak {view_peak}h, window {w0}-{w1}h ({:.1?})",
            t0.elapsed()
        ),
    )
}

fn collector_corpus(n: usize, base: NaiveDateTime) -> Vec<GroundTruthSeries> {
    (0..n)
        .map(|i| {
            let meta = VideoMeta::new(
                format!("v{i:03}"),
                format!("c{}", i % 25),
                base + TimeDelta::minutes((i % 60) as i64),
            );
            let len = 12 * 170;
            let views: Vec<u64> = (0..len).map(|s| ((s * 7 + i * 3) % 11) as u64).collect();
            let corrections: Vec<u64> = (0..len).map(|s| u64::from(s % 288 == 200) * 15).collect();
            GroundTruthSeries::new(meta, Resolution::FiveMin, views, corrections).unwrap()
        })
        .collect()
}

fn criterion_7_collector_safety() -> Outcome {
    let t0 = Instant::now();
    let base = NaiveDate::from_ymd_opt(2022, 2, 2)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    let truth = collector_corpus(500, base);
    let metas: Vec<VideoMeta> = truth.iter().map(|t| t.meta().clone()).collect();
    let fetcher = SimulatedFetcher::new(truth);
    let mut sched = Scheduler::new(QuotaBudget::new(DEFAULT_REQUESTS_PER_DAY, base));
    let mut store = PollStore::new(Resolution::Hour);
    for m in &metas {
        sched.add_job(MonitorJob::new(m));
        store.register(m.clone());
    }
    let dir = tempfile::tempdir().unwrap();
    let log_path = dir.path().join("polls.jsonl");
    let zone = viewtrace::time::parse_zone("UTC").unwrap();
    let (mut log, _) = PollLog::open(&log_path, zone).unwrap();

    let mut all: Vec<PollRecord> = Vec::new();
    let three_days = base + TimeDelta::days(3) - TimeDelta::seconds(1);
    while let Some(batch) = run_cycle(&mut sched, &mut store, &fetcher, exec(), three_days).unwrap() {
        log.append(&batch).unwrap();
        all.extend(batch);
    }
    let report = sched.report().clone();
    let mut per_day = std::collections::BTreeMap::new();
    for r in &all {
        *per_day.entry(r.at.date()).or_insert(0u32) += 1;
    }
    let within_quota = per_day.values().all(|&n| n <= DEFAULT_REQUESTS_PER_DAY);
    let exact_overflow = report.days.len() == 3
        && report
            .days
            .values()
            .all(|d| d.served == 10_000 && d.deferred == 2_000 && d.failed == 0);

    // keep going until every job is past its horizon
    let end = base + TimeDelta::days(30);
    while let Some(batch) = run_cycle(&mut sched, &mut store, &fetcher, exec(), end).unwrap() {
        log.append(&batch).unwrap();
        all.extend(batch);
    }
    let horizon = TimeDelta::hours(170);
    let within_horizon = all.iter().all(|r| {
        let m = &metas[r.video_id[1..].parse::<usize>().unwrap()];
        r.at >= m.published_at && r.at <= m.published_at + horizon
    }) && sched.next_due().is_none();

    let logged = read_log(&log_path, zone).unwrap();
    let mut replayed = PollStore::new(Resolution::Hour);
    for m in &metas {
        replayed.register(m.clone());
    }
    for r in logged.records.iter().chain(&logged.records) {
        replayed.record_poll(&r.video_id, r.at, r.total).unwrap();
    }
    let a = dir.path().join("live.jsonl");
    let b = dir.path().join("replayed.jsonl");
    write_observed(&a, &store.compact_all().unwrap()).unwrap();
    write_observed(&b, &replayed.compact_all().unwrap()).unwrap();
    let identical =
        replayed == store && logged.records == all && std::fs::read(&a).unwrap() == std::fs::read(&b).unwrap();

    let pass = within_quota && exact_overflow && within_horizon && identical && within(t0, 60);
    (pass, format!(
            "daily polls {:?}; deferred per day {:?}; horizon respected {within_horizon}; replay identical {identical} ({:.1?})",
            per_day.values().collect::<Vec<_>>(),
            report.days.values().map(|d| d.deferred).collect::<Vec<_>>(),
            t0.elapsed()
        ),
    )
}

fn main() {
    let criteria: [fn() -> Outcome; 7] = [
        criterion_1_metric_oracle,
        criterion_2_table_ordering,
        criterion_3_window_sweep,
        criterion_4_regression,
        criterion_5_classifier,
        criterion_6_analysis_invariants,
        criterion_7_collector_safety,
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, run) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| f == &n.to_string()) {
            continue;
        }
        let (pass, detail) = match std::panic::catch_unwind(run) {
            Ok(outcome) => outcome,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        failed += usize::from(!pass);
        println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
