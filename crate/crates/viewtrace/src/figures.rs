//! Figure data as CSV tables, each with an optional chart. The CSV is always
//! written first; a chart that fails to render only produces a warning.

use std::path::{Path, PathBuf};

use anyhow::Context;
use viewtrace_core::analyze::{HourSummary, LorenzCurve, MidnightProfile, RegressionFit, TimingProfile};
use viewtrace_core::benchmark::SweepRow;
use viewtrace_core::classifier::CvOutcome;

use crate::svg::{self, Chart, Mark};

#[derive(Debug, Clone)]
pub struct Figure {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub chart: Option<Chart>,
}

impl Figure {
    fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
            chart: None,
        }
    }

    fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) {
        self.rows.push(cells.into_iter().collect());
    }
}

#[derive(Debug, Clone)]
pub struct Emitted {
    pub csv: PathBuf,
    pub svg: Option<PathBuf>,
    pub svg_error: Option<String>,
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit(dir: &Path, fig: &Figure) -> anyhow::Result<Emitted> {
    let csv = dir.join(format!("{}.csv", fig.name));
    write_csv(&csv, &fig.header, &fig.rows)?;
    let mut out = Emitted {
        csv,
        svg: None,
        svg_error: None,
    };
    if let Some(chart) = &fig.chart {
        let path = dir.join(format!("{}.svg", fig.name));
        match svg::render(chart)
            .map_err(anyhow::Error::msg)
            .and_then(|s| Ok(std::fs::write(&path, s)?))
        {
            Ok(()) => out.svg = Some(path),
            Err(e) => out.svg_error = Some(format!("{}: {e}", path.display())),
        }
    }
    Ok(out)
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Concentration of views and corrections across videos.
pub fn lorenz_figure(views: &LorenzCurve, corrections: Option<&LorenzCurve>) -> Figure {
    let mut f = Figure::new("lorenz", &["series", "population_share", "mass_share"]);
    let mut chart = Chart::new("Lorenz curves", "share of videos", "share of total", Mark::Line)
        .with_series("equality", vec![(0.0, 0.0), (1.0, 1.0)]);
    for (name, curve) in [("views", Some(views)), ("corrections", corrections)] {
        let Some(curve) = curve else { continue };
        for &(x, y) in &curve.points {
            f.row([name.to_string(), num(x), num(y)]);
        }
        chart = chart.with_series(&format!("{name} (gini {:.3})", curve.gini), curve.points.clone());
    }
    f.chart = Some(chart);
    f
}

/// Hour-of-day distribution of one quantity.
pub fn rhythm_figure(name: &str, label: &str, summary: &[HourSummary]) -> Figure {
    let mut f = Figure::new(name, &["hour", "q1", "median", "q3", "days"]);
    for s in summary {
        f.row([
            s.hour.to_string(),
            num(s.q1),
            num(s.median),
            num(s.q3),
            s.days.to_string(),
        ]);
    }
    let pts = |g: fn(&HourSummary) -> f64| summary.iter().map(|s| (f64::from(s.hour), g(s))).collect();
    f.chart = Some(
        Chart::new(label, "hour of day", label, Mark::Line)
            .with_series("q1", pts(|s| s.q1))
            .with_series("median", pts(|s| s.median))
            .with_series("q3", pts(|s| s.q3)),
    );
    f
}

pub fn midnight_figure(p: &MidnightProfile) -> Figure {
    let mut f = Figure::new(
        "midnight_profile",
        &["offset_hours", "views", "corrections", "corrected_videos"],
    );
    for i in 0..p.views.len() {
        f.row([
            i.to_string(),
            num(p.views[i]),
            num(p.corrections[i]),
            num(p.corrected_videos[i]),
        ]);
    }
    let pts = |v: &[f64]| v.iter().enumerate().map(|(i, &y)| (i as f64, y)).collect();
    f.chart = Some(
        Chart::new(
            "Hours since the midnight before publication",
            "hours",
            "normalized",
            Mark::Line,
        )
        .with_series("views", pts(&p.views))
        .with_series("corrections", pts(&p.corrections))
        .with_series("corrected videos", pts(&p.corrected_videos)),
    );
    f
}

pub fn timing_figure(t: &TimingProfile) -> Figure {
    let mut f = Figure::new("timing", &["view_percentile", "corrections_before"]);
    for (p, b) in t.percentiles.iter().zip(&t.fraction_before) {
        f.row([num(*p), num(*b)]);
    }
    f.chart = Some(
        Chart::new(
            &format!(
                "Corrections vs popularity ({:.1}% after views stop)",
                100.0 * t.fraction_after_stop
            ),
            "share of final real views reached",
            "share of corrections already made",
            Mark::Line,
        )
        .with_series(
            "corrections",
            t.percentiles
                .iter()
                .copied()
                .zip(t.fraction_before.iter().copied())
                .collect(),
        ),
    );
    f
}

pub fn regression_figure(channels: &[(String, f64, f64)], fit: Option<&RegressionFit>) -> Figure {
    let mut f = Figure::new(
        "channel_regression",
        &["channel_id", "real_views", "corrections", "fitted"],
    );
    for (id, v, c) in channels {
        let fitted = fit
            .filter(|_| *v > 0.0)
            .map_or(String::new(), |fit| num(fit.predict(*v)));
        f.row([id.clone(), num(*v), num(*c), fitted]);
    }
    let mut chart = Chart::new(
        "Corrections vs real views per channel",
        "real views",
        "corrections",
        Mark::Scatter,
    )
    .log_log()
    .with_series("channels", channels.iter().map(|(_, v, c)| (*v, *c)).collect());
    if let Some(fit) = fit {
        let (lo, hi) = channels
            .iter()
            .filter(|c| c.1 > 0.0)
            .fold((f64::INFINITY, 0.0f64), |(a, b), c| (a.min(c.1), b.max(c.1)));
        if lo.is_finite() {
            let line: Vec<(f64, f64)> = (0..=20)
                .map(|i| {
                    let v = lo * (hi / lo).powf(f64::from(i) / 20.0);
                    (v, fit.predict(v))
                })
                .collect();
            chart.series.push((format!("fit slope {:.3}", fit.slope), line));
        }
    }
    f.chart = Some(chart);
    f
}

pub fn sweep_figure(rows: &[SweepRow]) -> Figure {
    let mut f = Figure::new(
        "window_sweep",
        &[
            "half_width_hours",
            "statistic",
            "lost_corrections",
            "added_corrections",
            "lost_interventions",
            "added_interventions",
        ],
    );
    let mut chart = Chart::new(
        "Benchmark window sweep",
        "half-width (hours)",
        "lost corrections",
        Mark::Line,
    );
    let mut by_stat: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for r in rows {
        let w = r.window;
        let rep = &r.report;
        f.row([
            w.half_width_hours.to_string(),
            w.statistic.to_string(),
            num(rep.lost_corrections),
            num(rep.added_corrections),
            num(rep.lost_interventions),
            num(rep.added_interventions),
        ]);
        let key = w.statistic.to_string();
        let point = (f64::from(w.half_width_hours), rep.lost_corrections);
        match by_stat.iter_mut().find(|(k, _)| *k == key) {
            Some((_, pts)) => pts.push(point),
            None => by_stat.push((key, vec![point])),
        }
    }
    chart.series = by_stat;
    f.chart = Some(chart);
    f
}

pub fn cv_figure(cv: &CvOutcome) -> Figure {
    let folds = cv.table.first().map_or(0, |r| r.fold_f1.len());
    let mut header = vec![
        "max_depth".to_string(),
        "learning_rate".into(),
        "l1_regularization".into(),
        "num_rounds".into(),
        "threshold".into(),
        "mean_f1".into(),
    ];
    header.extend((1..=folds).map(|i| format!("fold{i}_f1")));
    let mut f = Figure {
        name: "cv_table".into(),
        header,
        rows: Vec::new(),
        chart: None,
    };
    for r in &cv.table {
        let p = &r.params;
        let mut cells = vec![
            p.max_depth.to_string(),
            num(p.learning_rate),
            num(p.l1_regularization),
            p.num_rounds.to_string(),
            num(p.decision_threshold),
            num(r.mean_f1),
        ];
        cells.extend(r.fold_f1.iter().map(|&v| num(v)));
        f.row(cells);
    }
    f
}

/// Options for charting an arbitrary CSV.
#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub x: Option<String>,
    pub y: Vec<String>,
    pub mark: Mark,
    pub log_x: bool,
    pub log_y: bool,
    pub title: Option<String>,
}

/// Charts numeric columns of a CSV: `x` (default: first column) against each
/// `y` (default: every other numeric column).
pub fn plot_csv(csv_path: &Path, svg_path: &Path, spec: &PlotSpec) -> anyhow::Result<()> {
    let mut r = csv::Reader::from_path(csv_path).with_context(|| format!("opening {}", csv_path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let rows: Vec<csv::StringRecord> = r.records().collect::<Result<_, _>>()?;
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| crate::error::usage(format!("no column {name:?} in {}", csv_path.display())))
    };
    let xi = match &spec.x {
        Some(x) => col(x)?,
        None => 0,
    };
    let numeric = |i: usize| {
        rows.iter()
            .all(|r| r.get(i).is_some_and(|v| v.is_empty() || v.parse::<f64>().is_ok()))
    };
    let ys: Vec<usize> = if spec.y.is_empty() {
        (0..header.len()).filter(|&i| i != xi && numeric(i)).collect()
    } else {
        spec.y.iter().map(|y| col(y)).collect::<anyhow::Result<_>>()?
    };
    let mut chart = Chart::new(spec.title.as_deref().unwrap_or(&header[xi]), &header[xi], "", spec.mark);
    chart.log_x = spec.log_x;
    chart.log_y = spec.log_y;
    for yi in ys {
        let pts = rows
            .iter()
            .filter_map(|r| Some((r.get(xi)?.parse().ok()?, r.get(yi)?.parse().ok()?)))
            .collect();
        chart.series.push((header[yi].clone(), pts));
    }
    let svg = svg::render(&chart).map_err(anyhow::Error::msg)?;
    std::fs::write(svg_path, svg).with_context(|| format!("writing {}", svg_path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use viewtrace_core::analyze::lorenz;

    #[test]
    fn csv_survives_a_failed_chart() {
        let dir = tempfile::tempdir().unwrap();
        let fig = regression_figure(&[("a".into(), 0.0, 0.0), ("b".into(), -1.0, 0.0)], None);
        let out = emit(dir.path(), &fig).unwrap();
        assert!(out.csv.exists());
        assert!(out.svg.is_none());
        assert!(out.svg_error.is_some());
        let text = std::fs::read_to_string(&out.csv).unwrap();
        assert!(text.starts_with("channel_id,real_views,corrections,fitted\n"));
    }

    #[test]
    fn lorenz_rows_and_chart() {
        let dir = tempfile::tempdir().unwrap();
        let curve = lorenz(&[0.0, 0.0, 0.0, 10.0]).unwrap();
        let out = emit(dir.path(), &lorenz_figure(&curve, None)).unwrap();
        assert!(out.svg.is_some());
        let text = std::fs::read_to_string(&out.csv).unwrap();
        assert_eq!(text.lines().count(), 1 + curve.points.len());

        let svg = dir.path().join("again.svg");
        let spec = PlotSpec {
            x: Some("population_share".into()),
            y: vec!["mass_share".into()],
            mark: Mark::Line,
            log_x: false,
            log_y: false,
            title: None,
        };
        plot_csv(&out.csv, &svg, &spec).unwrap();
        assert!(std::fs::read_to_string(svg).unwrap().contains("polyline"));
    }
}
