//! Side-by-side comparison of estimators on a ground-truth corpus.

use std::fmt::Write as _;

use serde::Serialize;
use viewtrace_core::metrics::ReconstructionReport;

#[derive(Debug, Clone, Serialize)]
pub struct MethodReport {
    pub method: String,
    #[serde(flatten)]
    pub report: ReconstructionReport,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ComparisonTable {
    pub methods: Vec<MethodReport>,
}

impl ComparisonTable {
    pub fn push(&mut self, method: &str, report: ReconstructionReport) {
        self.methods.push(MethodReport {
            method: method.into(),
            report,
        });
    }

    /// Percentages, one column per method.
    pub fn to_text(&self) -> String {
        type Getter = fn(&ReconstructionReport) -> f64;
        let rows: [(&str, Getter); 4] = [
            ("Lost Corrections", |r| r.lost_corrections),
            ("Added Corrections", |r| r.added_corrections),
            ("Lost Interventions", |r| r.lost_interventions),
            ("Added Interventions", |r| r.added_interventions),
        ];
        let width = self.methods.iter().map(|m| m.method.len()).max().unwrap_or(0).max(9);
        let mut out = format!("{:<20}", "");
        for m in &self.methods {
            let _ = write!(out, " {:>width$}", m.method);
        }
        out.push('\n');
        for (label, get) in rows {
            let _ = write!(out, "{label:<20}");
            for m in &self.methods {
                let _ = write!(out, " {:>width$}", format!("{:.2}%", 100.0 * get(&m.report)));
            }
            out.push('\n');
        }
        if let Some(m) = self.methods.first() {
            let _ = writeln!(
                out,
                "true corrections: {}, true intervention slots: {}",
                m.report.total_corrections, m.report.total_intervention_slots
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(lost: f64) -> ReconstructionReport {
        ReconstructionReport {
            lost_corrections: lost,
            added_corrections: 0.01,
            lost_interventions: 0.5,
            added_interventions: 0.0,
            total_corrections: 1000,
            total_intervention_slots: 40,
        }
    }

    #[test]
    fn text_layout() {
        let mut t = ComparisonTable::default();
        t.push("naive", report(0.4453));
        t.push("benchmark", report(0.13));
        let text = t.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        assert!(lines[0].ends_with("    naive benchmark"));
        assert!(lines[1].starts_with("Lost Corrections"));
        assert!(lines[1].contains("44.53%"));
        assert!(lines[1].ends_with("13.00%"));
        assert!(lines[5].contains("1000"));
    }

    #[test]
    fn json_is_flat() {
        let mut t = ComparisonTable::default();
        t.push("naive", report(0.5));
        let v = serde_json::to_value(&t).unwrap();
        assert_eq!(v["methods"][0]["method"], "naive");
        assert_eq!(v["methods"][0]["lost_corrections"], 0.5);
    }
}
