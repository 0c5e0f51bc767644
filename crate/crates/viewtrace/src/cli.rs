//! Command-line front end.
//!
//! Exit status: 0 on success, 1 for unreadable or inconsistent data, 2 for
//! usage errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use chrono::FixedOffset;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use viewtrace_core::analyze::{
    channel_totals, corrections_vs_popularity, coverage_stats, hourly_rhythm, loglog_regression, lorenz,
    midnight_profile, pair_up, peak_hour, RhythmQuantity,
};
use viewtrace_core::benchmark::{best_by_lost_corrections, window_sweep, Benchmark, Statistic, WindowSpec};
use viewtrace_core::classifier::{ModelParams, ParamGrid};
use viewtrace_core::exec::Executor;
use viewtrace_core::metrics::{evaluate, Estimator, Naive};
use viewtrace_core::series::{CorrectionEstimate, GroundTruthSeries, ViewSeries};
use viewtrace_core::simgen::generate_corpus;

use crate::collect::Collector;
use crate::config::{self, CollectorConfig};
use crate::error::{usage, DataError, UsageError};
use crate::exec::Parallel;
use crate::figures::{self, PlotSpec};
use crate::io::{self, Series};
use crate::manifest::RunManifest;
use crate::model_io::{self, ModelDocument};
use crate::report::ComparisonTable;
use crate::svg::Mark;
use crate::time::parse_zone;
use crate::training::{Prepared, DEFAULT_TEST_FRACTION};

#[derive(Debug, Parser)]
#[command(
    name = "viewtrace",
    version,
    about = "Reconstruct hidden view-count corrections from hourly telemetry"
)]
pub struct Cli {
    /// Worker threads for per-video work (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// UTC offset that timestamps carrying their own offset are converted to.
    #[arg(long, global = true, default_value = "+01:00", value_name = "OFFSET")]
    pub utc_offset: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic ground-truth corpus at 5-minute resolution.
    Simulate(SimulateArgs),
    /// Aggregate a corpus to hourly slots.
    Aggregate(AggregateArgs),
    /// Estimate corrections for every video of a corpus.
    Reconstruct(ReconstructArgs),
    /// Train the concealed-correction classifier on a ground-truth corpus.
    Train(TrainArgs),
    /// Cross-validate the classifier over a hyperparameter grid.
    Tune(TuneArgs),
    /// Score estimators against ground truth.
    Evaluate(EvaluateArgs),
    /// Corpus analyses written as CSV and SVG.
    Analyze(AnalyzeArgs),
    /// Poll a simulated platform under a daily request quota.
    Collect(CollectArgs),
    /// Chart columns of a CSV file as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML file with simulation parameters.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the observed hourly deltas instead of hourly ground truth.
    #[arg(long)]
    pub observe: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Naive,
    Benchmark,
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StatisticArg {
    Minimum,
    Mean,
}

impl From<StatisticArg> for Statistic {
    fn from(s: StatisticArg) -> Self {
        match s {
            StatisticArg::Minimum => Statistic::Minimum,
            StatisticArg::Mean => Statistic::Mean,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WindowArgs {
    /// Hours read on each side of a negative delta.
    #[arg(long, default_value_t = 1)]
    pub half_width: u32,
    #[arg(long, value_enum, default_value = "minimum")]
    pub statistic: StatisticArg,
}

impl WindowArgs {
    fn spec(&self) -> anyhow::Result<WindowSpec> {
        WindowSpec::new(self.half_width, self.statistic.into()).map_err(|e| usage(e.to_string()))
    }
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Corpus of observed or ground-truth series.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub method: Method,
    /// Model file from `train` or `tune` (required for `--method model`).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub window: WindowArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ParamArgs {
    #[arg(long, default_value_t = ModelParams::default().max_depth)]
    pub max_depth: u32,
    #[arg(long, default_value_t = ModelParams::default().learning_rate)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = ModelParams::default().l1_regularization)]
    pub l1: f64,
    #[arg(long, default_value_t = ModelParams::default().num_rounds)]
    pub rounds: u32,
    #[arg(long, default_value_t = ModelParams::default().decision_threshold)]
    pub threshold: f64,
}

impl ParamArgs {
    fn params(&self) -> anyhow::Result<ModelParams> {
        let p = ModelParams {
            max_depth: self.max_depth,
            learning_rate: self.learning_rate,
            l1_regularization: self.l1,
            num_rounds: self.rounds,
            decision_threshold: self.threshold,
            ..ModelParams::default()
        };
        p.validate().map_err(|e| usage(e.to_string()))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SplitArgs {
    /// Share of videos held out for testing.
    #[arg(long, default_value_t = DEFAULT_TEST_FRACTION)]
    pub test_fraction: f64,
    /// Seed of the video shuffle behind the split.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub truth: PathBuf,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub window: WindowArgs,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub truth: PathBuf,
    /// Directory for the CV table, the best parameters and the tuned model.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub window: WindowArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMethod {
    Naive,
    Benchmark,
    Model,
    All,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub method: EvalMethod,
    /// Model file; with `--method all` the model column is added when given.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub window: WindowArgs,
    /// Score only the videos the model was not trained on.
    #[arg(long)]
    pub heldout: bool,
    #[command(flatten)]
    pub split: SplitArgs,
    /// JSON copy of the report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also sweep window half-widths 1..=6 with both statistics and write
    /// the table (CSV and SVG) here.
    #[arg(long)]
    pub sweep_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisKind {
    Coverage,
    Lorenz,
    Rhythm,
    Midnight,
    Timing,
    Regression,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(value_enum)]
    pub kind: AnalysisKind,
    /// Ground truth, or observed series together with `--estimates`.
    #[arg(long)]
    pub input: PathBuf,
    /// Estimates from `reconstruct`, aligned with the input.
    #[arg(long)]
    pub estimates: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// View percentiles for the timing analysis, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0"
    )]
    pub percentiles: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct CollectArgs {
    /// Ground truth the simulated platform answers from.
    #[arg(long)]
    pub truth: PathBuf,
    /// TOML collector settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Append-only poll log; an existing log is resumed.
    #[arg(long)]
    pub log: PathBuf,
    /// Compacted observed series.
    #[arg(long)]
    pub out: PathBuf,
    /// Starvation report (JSON).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Keep cycling until every job has passed its horizon.
    #[arg(long = "loop")]
    pub run_loop: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Line,
    Scatter,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "line")]
    pub kind: PlotKind,
    /// X column (default: the first).
    #[arg(long)]
    pub x: Option<String>,
    /// Y columns (default: every other numeric column).
    #[arg(long)]
    pub y: Vec<String>,
    #[arg(long)]
    pub log_x: bool,
    #[arg(long)]
    pub log_y: bool,
    #[arg(long)]
    pub title: Option<String>,
}

/// Parses `args` and runs the command, mapping failures to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

/// Writes a line to stdout. A closed pipe ends output quietly.
fn out(text: &str) -> anyhow::Result<()> {
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{text}").and_then(|()| stdout.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn exit_code(e: &anyhow::Error) -> ExitCode {
    if e.downcast_ref::<UsageError>().is_some() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

struct RunContext {
    exec: Parallel,
    zone: FixedOffset,
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let zone = parse_zone(&cli.utc_offset).map_err(usage)?;
    let cx = RunContext {
        exec: Parallel::new(cli.jobs)?,
        zone,
    };
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Aggregate(a) => aggregate(&cx, &a),
        Command::Reconstruct(a) => reconstruct(&cx, &a),
        Command::Train(a) => train(&cx, &a),
        Command::Tune(a) => tune(&cx, &a),
        Command::Evaluate(a) => evaluate_cmd(&cx, &a),
        Command::Analyze(a) => analyze_cmd(&cx, &a),
        Command::Collect(a) => collect(&cx, &a),
        Command::Plot(a) => plot(&a),
    }
}

fn simulate(a: &SimulateArgs) -> anyhow::Result<()> {
    let mut cfg = config::load_sim(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.rng_seed = seed;
    }
    // the corpus is seeded per channel, so the thread count cannot change it
    let truth = generate_corpus(&cfg, &Parallel::new(None)?)?;
    io::write_truth(&a.out, &truth)?;
    let mut m = RunManifest::new("simulate", &cfg)?.output(&a.out).seed(cfg.rng_seed);
    if let Some(c) = &a.config {
        m = m.input(c);
    }
    m.write_beside(&a.out)?;
    eprintln!("wrote {} videos to {}", truth.len(), a.out.display());
    Ok(())
}

fn aggregate(cx: &RunContext, a: &AggregateArgs) -> anyhow::Result<()> {
    let series = io::read_series(&a.input, cx.zone)?;
    let at = |i: usize, e: viewtrace_core::Error| DataError::at_line(&a.input, i + 1, e);
    let mut out = Vec::with_capacity(series.len());
    for (i, s) in series.iter().enumerate() {
        out.push(match (s, a.observe) {
            (Series::Truth(t), false) => Series::Truth(t.aggregate_to_hour().map_err(|e| at(i, e))?),
            _ => Series::Observed(s.hourly_observed().map_err(|e| at(i, e))?),
        });
    }
    io::write_series(&a.out, &out)?;
    RunManifest::new("aggregate", &json!({ "observe": a.observe }))?
        .input(&a.input)
        .output(&a.out)
        .write_beside(&a.out)?;
    Ok(())
}

fn load_model(path: Option<&Path>) -> anyhow::Result<(ModelDocument, viewtrace_core::classifier::Reconstructor)> {
    let path = path.ok_or_else(|| usage("--model is required for the model method"))?;
    let doc = model_io::load(path)?;
    let rec = doc.reconstructor().map_err(|e| DataError::in_file(path, e))?;
    Ok((doc, rec))
}

fn estimate_all<E: Estimator, X: Executor>(series: &[ViewSeries], est: &E, exec: &X) -> Vec<CorrectionEstimate> {
    exec.map(series, |s| est.estimate(s))
}

fn reconstruct(cx: &RunContext, a: &ReconstructArgs) -> anyhow::Result<()> {
    let window = a.window.spec()?;
    if a.method == Method::Model && a.model.is_none() {
        return Err(usage("--model is required for the model method"));
    }
    let series = io::read_hourly_observed(&a.input, cx.zone)?;
    let (estimates, cfg) = match a.method {
        Method::Naive => (estimate_all(&series, &Naive, &cx.exec), json!({ "method": a.method })),
        Method::Benchmark => (
            estimate_all(&series, &Benchmark(window), &cx.exec),
            json!({ "method": a.method, "window": window }),
        ),
        Method::Model => {
            let (doc, rec) = load_model(a.model.as_deref())?;
            (
                estimate_all(&series, &rec, &cx.exec),
                json!({ "method": a.method, "model": crate::manifest::digest(&doc)? }),
            )
        }
    };
    io::write_estimates(&a.out, &estimates)?;
    let mut m = RunManifest::new("reconstruct", &cfg)?.input(&a.input).output(&a.out);
    if let Some(p) = &a.model {
        m = m.input(p);
    }
    m.write_beside(&a.out)?;
    Ok(())
}

fn train(cx: &RunContext, a: &TrainArgs) -> anyhow::Result<()> {
    let truth = io::read_truth(&a.truth, cx.zone)?;
    let params = a.params.params()?;
    let window = a.window.spec()?;
    let prep = Prepared::new(&truth, a.split.test_fraction, a.split.split_seed)?;
    let model = prep.train(&params)?;
    let heldout_f1 = if prep.test_rows.is_empty() {
        None
    } else {
        prep.heldout_f1(&model).ok()
    };
    model_io::save(&a.out, &ModelDocument::new(&model, window))?;
    RunManifest::new(
        "train",
        &json!({ "params": params, "split": a.split, "window": window }),
    )?
    .input(&a.truth)
    .output(&a.out)
    .seed(a.split.split_seed)
    .write_beside(&a.out)?;
    let summary = json!({
        "train_videos": prep.train_videos.len(),
        "test_videos": prep.test_videos.len(),
        "positives": prep.set.positives(),
        "rows": prep.set.len(),
        "heldout_f1": heldout_f1,
    });
    out(&serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

fn tune(cx: &RunContext, a: &TuneArgs) -> anyhow::Result<()> {
    let truth = io::read_truth(&a.truth, cx.zone)?;
    let window = a.window.spec()?;
    if a.folds < 2 {
        return Err(usage("--folds must be at least 2"));
    }
    std::fs::create_dir_all(&a.out_dir)?;
    let prep = Prepared::new(&truth, a.split.test_fraction, a.split.split_seed)?;
    let grid = ParamGrid::standard();
    let cv = prep.tune(&grid, a.folds, &cx.exec)?;
    let table = figures::emit(&a.out_dir, &figures::cv_figure(&cv))?;
    let model = prep.train(&cv.best)?;
    let heldout_f1 = if prep.test_rows.is_empty() {
        None
    } else {
        prep.heldout_f1(&model).ok()
    };
    let model_path = a.out_dir.join("model.json");
    model_io::save(&model_path, &ModelDocument::new(&model, window))?;
    let best_path = a.out_dir.join("best.json");
    let best = json!({ "params": cv.best, "heldout_f1": heldout_f1 });
    std::fs::write(&best_path, serde_json::to_string_pretty(&best)? + "\n")?;
    RunManifest::new(
        "tune",
        &json!({ "grid": grid, "folds": a.folds, "split": a.split, "window": window }),
    )?
    .input(&a.truth)
    .output(&table.csv)
    .output(&model_path)
    .output(&best_path)
    .seed(a.split.split_seed)
    .write_beside(&best_path)?;
    out(&serde_json::to_string_pretty(&best)?)?;
    Ok(())
}

fn evaluate_cmd(cx: &RunContext, a: &EvaluateArgs) -> anyhow::Result<()> {
    let all_truth = io::read_truth(&a.truth, cx.zone)?;
    let truth = if a.heldout {
        Prepared::new(&all_truth, a.split.test_fraction, a.split.split_seed)?.test_truth(&all_truth)
    } else {
        all_truth
    };
    let window = a.window.spec()?;
    let want = |m: EvalMethod| a.method == m || a.method == EvalMethod::All;
    let mut table = ComparisonTable::default();
    if want(EvalMethod::Naive) {
        table.push("naive", evaluate(&truth, &Naive, &cx.exec)?);
    }
    if want(EvalMethod::Benchmark) {
        table.push(
            &format!("benchmark({window})"),
            evaluate(&truth, &Benchmark(window), &cx.exec)?,
        );
    }
    if a.method == EvalMethod::Model || (a.method == EvalMethod::All && a.model.is_some()) {
        let (_, rec) = load_model(a.model.as_deref())?;
        table.push("model", evaluate(&truth, &rec, &cx.exec)?);
    }
    out(table.to_text().trim_end())?;

    let mut outputs = Vec::new();
    if let Some(dir) = &a.sweep_dir {
        std::fs::create_dir_all(dir)?;
        let rows = window_sweep(
            &truth,
            &[1, 2, 3, 4, 5, 6],
            &[Statistic::Minimum, Statistic::Mean],
            &cx.exec,
        )?;
        let emitted = figures::emit(dir, &figures::sweep_figure(&rows))?;
        warn_svg(&emitted);
        if let Some(best) = best_by_lost_corrections(&rows) {
            out(&format!(
                "best window: {} (lost corrections {:.2}%)",
                best.window,
                100.0 * best.report.lost_corrections
            ))?;
        }
        outputs.push(emitted.csv);
    }
    if let Some(out) = &a.out {
        std::fs::write(out, serde_json::to_string_pretty(&table)? + "\n")?;
        outputs.insert(0, out.clone());
    }
    if let Some(primary) = outputs.first() {
        let mut m = RunManifest::new(
            "evaluate",
            &json!({ "window": window, "heldout": a.heldout, "split": a.split }),
        )?
        .input(&a.truth);
        if let Some(p) = &a.model {
            m = m.input(p);
        }
        for o in &outputs {
            m = m.output(o);
        }
        m.write_beside(primary)?;
    }
    Ok(())
}

fn warn_svg(e: &figures::Emitted) {
    if let Some(msg) = &e.svg_error {
        eprintln!("warning: chart not written: {msg}");
    }
}

fn analyze_cmd(cx: &RunContext, a: &AnalyzeArgs) -> anyhow::Result<()> {
    let series = io::read_series(&a.input, cx.zone)?;
    let mut observed = Vec::with_capacity(series.len());
    let mut truth_estimates = Vec::new();
    for (i, s) in series.iter().enumerate() {
        let bad = |e: viewtrace_core::Error| DataError::at_line(&a.input, i + 1, e);
        match s {
            Series::Truth(t) => {
                let hourly = t.to_hourly().map_err(bad)?;
                truth_estimates.push(CorrectionEstimate {
                    video_id: hourly.video_id().into(),
                    estimates: hourly.corrections().to_vec(),
                });
                observed.push(hourly.observe());
            }
            Series::Observed(_) => observed.push(s.hourly_observed().map_err(bad)?),
        }
    }
    let estimates = match &a.estimates {
        Some(p) => io::read_estimates(p)?,
        None if truth_estimates.len() == observed.len() => truth_estimates,
        None => return Err(usage("observed input needs --estimates")),
    };
    let corpus = pair_up(&observed, &estimates).map_err(|e| {
        let path = a.estimates.as_deref().unwrap_or(&a.input);
        DataError::in_file(path, e)
    })?;
    std::fs::create_dir_all(&a.out_dir)?;

    let mut figs = Vec::new();
    let summary = match a.kind {
        AnalysisKind::Coverage => serde_json::to_value(coverage_stats(&corpus))?,
        AnalysisKind::Lorenz => {
            let views: Vec<f64> = corpus.iter().map(|r| r.real_views().sum::<u64>() as f64).collect();
            let corr: Vec<f64> = corpus.iter().map(|r| r.estimate.total() as f64).collect();
            let v = lorenz(&views)?;
            let c = lorenz(&corr)?;
            let summary = json!({
                "gini_views": v.gini,
                "gini_corrections": c.gini,
                "top_1pct_views_share": v.top_share(0.01),
                "top_1pct_corrections_share": c.top_share(0.01),
            });
            figs.push(figures::lorenz_figure(&v, Some(&c)));
            summary
        }
        AnalysisKind::Rhythm => {
            let mut peaks = serde_json::Map::new();
            for (name, label, q) in [
                (
                    "rhythm_corrections",
                    "corrections per hour",
                    RhythmQuantity::Corrections,
                ),
                (
                    "rhythm_corrected_videos",
                    "corrected videos per hour",
                    RhythmQuantity::CorrectedVideos,
                ),
                ("rhythm_views", "real views per hour", RhythmQuantity::Views),
            ] {
                let s = hourly_rhythm(&corpus, q);
                peaks.insert(format!("{name}_peak_hour"), json!(peak_hour(&s)));
                figs.push(figures::rhythm_figure(name, label, &s));
            }
            serde_json::Value::Object(peaks)
        }
        AnalysisKind::Midnight => {
            figs.push(figures::midnight_figure(&midnight_profile(&corpus)));
            json!({ "videos": corpus.len() })
        }
        AnalysisKind::Timing => {
            let t = corrections_vs_popularity(&corpus, &a.percentiles).map_err(|e| match e {
                viewtrace_core::Error::InvalidParam(m) => usage(m),
                e => e.into(),
            })?;
            figs.push(figures::timing_figure(&t));
            serde_json::to_value(&t)?
        }
        AnalysisKind::Regression => {
            let totals = channel_totals(&corpus);
            let rows: Vec<(String, f64, f64)> = totals
                .iter()
                .map(|(id, &(v, c))| (id.clone(), v as f64, c as f64))
                .collect();
            let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.1, r.2)).collect();
            let fit = loglog_regression(&points);
            figs.push(figures::regression_figure(&rows, fit.as_ref().ok()));
            match fit {
                Ok(f) => serde_json::to_value(f)?,
                Err(e) => json!({ "error": e.to_string(), "channels": rows.len() }),
            }
        }
    };

    let summary_path = a.out_dir.join(format!(
        "{}.json",
        serde_json::to_value(a.kind)?.as_str().unwrap_or("analysis")
    ));
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")?;
    let mut m = RunManifest::new("analyze", &json!({ "kind": a.kind, "percentiles": a.percentiles }))?
        .input(&a.input)
        .output(&summary_path);
    if let Some(p) = &a.estimates {
        m = m.input(p);
    }
    for f in &figs {
        let e = figures::emit(&a.out_dir, f)?;
        warn_svg(&e);
        m = m.output(&e.csv);
        if let Some(svg) = &e.svg {
            m = m.output(svg);
        }
    }
    m.write_beside(&summary_path)?;
    out(&serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

fn collect(cx: &RunContext, a: &CollectArgs) -> anyhow::Result<()> {
    let cfg: CollectorConfig = config::load(a.config.as_deref())?;
    cfg.validate().map_err(|m| {
        let path = a.config.as_deref().unwrap_or(Path::new("<defaults>"));
        anyhow::Error::from(DataError::in_file(path, m))
    })?;
    let zone = cfg.zone().map_err(usage)?;
    let truth: Vec<GroundTruthSeries> = io::read_truth(&a.truth, zone)?;
    let (mut collector, replayed) = Collector::open(truth, &cfg, &a.log)?;
    let mut summary = collector.run(&cx.exec, a.run_loop)?;
    summary.replayed = replayed;
    let observed = collector.observed()?;
    io::write_observed(&a.out, &observed)?;
    let report = collector.scheduler.report();
    if let Some(p) = &a.report {
        std::fs::write(p, serde_json::to_string_pretty(report)? + "\n")?;
    }
    let mut m = RunManifest::new("collect", &cfg)?
        .input(&a.truth)
        .output(&a.log)
        .output(&a.out);
    if let Some(p) = &a.config {
        m = m.input(p);
    }
    if let Some(p) = &a.report {
        m = m.output(p);
    }
    m.write_beside(&a.out)?;

    if report.is_starved() {
        eprintln!("quota starvation: {} polls deferred", report.total_deferred());
        for (day, load) in &report.days {
            if load.deferred > 0 {
                eprintln!(
                    "  {day}: served {} deferred {} failed {}",
                    load.served, load.deferred, load.failed
                );
            }
        }
    }
    let last = collector.last_cycle().map(crate::time::format_timestamp);
    let summary = json!({
        "cycles": summary.cycles,
        "polls": summary.polls,
        "replayed": summary.replayed,
        "last_cycle": last,
        "served": report.total_served(),
        "deferred": report.total_deferred(),
        "pending": collector.scheduler.next_due().map(crate::time::format_timestamp),
    });
    out(&serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

fn plot(a: &PlotArgs) -> anyhow::Result<()> {
    let spec = PlotSpec {
        x: a.x.clone(),
        y: a.y.clone(),
        mark: match a.kind {
            PlotKind::Line => Mark::Line,
            PlotKind::Scatter => Mark::Scatter,
        },
        log_x: a.log_x,
        log_y: a.log_y,
        title: a.title.clone(),
    };
    if !a.csv.exists() {
        return Err(anyhow::anyhow!("{} does not exist", a.csv.display()));
    }
    figures::plot_csv(&a.csv, &a.out, &spec).with_context(|| format!("plotting {}", a.csv.display()))?;
    RunManifest::new(
        "plot",
        &json!({ "x": a.x, "y": a.y, "log_x": a.log_x, "log_y": a.log_y }),
    )?
    .input(&a.csv)
    .output(&a.out)
    .write_beside(&a.out)?;
    Ok(())
}
