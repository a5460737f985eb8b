use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::experiment::{ExperimentReport, Summary};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Full-precision JSON.
    Json,
    /// Aligned text, percentages with two decimals.
    Table,
    /// One row per scenario and approach, full precision.
    Csv,
}

pub fn render_json(report: &ExperimentReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn parse_report(text: &str) -> Result<ExperimentReport> {
    Ok(serde_json::from_str(text)?)
}

fn rows(report: &ExperimentReport) -> Vec<(String, &'static str, &Summary)> {
    let mut out = Vec::new();
    for s in &report.scenarios {
        out.push((s.zero_day_class.clone(), "naive", &s.averages.naive));
        out.push((s.zero_day_class.clone(), "pso", &s.averages.pso));
    }
    out.push(("average".into(), "naive", &report.totals.naive));
    out.push(("average".into(), "pso", &report.totals.pso));
    out
}

const COLUMNS: [&str; 7] = ["precision", "recall", "f1", "accuracy", "zero_day_dr", "benign_rej", "val_fitness"];

fn values(s: &Summary) -> [f64; 7] {
    [
        s.macro_precision,
        s.macro_recall,
        s.macro_f1,
        s.accuracy,
        s.zero_day_detection_rate,
        s.benign_rejection_rate,
        s.validation_fitness,
    ]
}

pub fn render_table(report: &ExperimentReport) -> String {
    let rows = rows(report);
    let name_w = rows.iter().map(|r| r.0.chars().count()).max().unwrap_or(0).max("zero-day".len());
    let mut out = String::new();
    let _ = write!(out, "{:<name_w$}  {:<8}", "zero-day", "approach");
    for c in &COLUMNS {
        let _ = write!(out, "  {c:>11}");
    }
    out.push('\n');
    for (name, approach, summary) in &rows {
        let _ = write!(out, "{name:<name_w$}  {approach:<8}");
        for v in &values(summary) {
            let _ = write!(out, "  {:>11.2}", v * 100.0);
        }
        out.push('\n');
    }
    out
}

pub fn render_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("zero_day,approach,");
    out.push_str(&COLUMNS.join(","));
    out.push('\n');
    for (name, approach, summary) in rows(report) {
        let _ = write!(out, "{name},{approach}");
        for v in &values(summary) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn emit_report(report: &ExperimentReport, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let text = match format {
        ReportFormat::Json => render_json(report),
        ReportFormat::Table => render_table(report),
        ReportFormat::Csv => render_csv(report),
    };
    let path = path.as_ref();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, SyntheticConfig};
    use crate::eval::{run_experiment, ExperimentConfig, ProtocolConfig};
    use crate::iforest::ForestParams;
    use crate::pso::PsoConfig;

    fn report() -> ExperimentReport {
        let ds = gen_synthetic(&SyntheticConfig::balanced(3, 30, 3, 8)).unwrap();
        let cfg = ExperimentConfig {
            master_seed: 1,
            forest: ForestParams { num_trees: 10, sample_size: 32, seed: 0 },
            pso: PsoConfig { population: 6, generations: 4, ..Default::default() },
            protocol: ProtocolConfig { folds: 2, ..Default::default() },
        };
        run_experiment(&ds, &cfg).unwrap()
    }

    #[test]
    fn json_round_trip() {
        let r = report();
        assert_eq!(parse_report(&render_json(&r)).unwrap(), r);
        let stripped = r.without_timings();
        assert!(!render_json(&stripped).contains("timings"));
        assert_eq!(parse_report(&render_json(&stripped)).unwrap(), stripped);
    }

    #[test]
    fn table_layout() {
        let r = report();
        let table = render_table(&r);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 1 + 2 * (r.scenarios.len() + 1));
        for s in &r.scenarios {
            for approach in ["naive", "pso"] {
                assert_eq!(
                    lines.iter().filter(|l| l.starts_with(&s.zero_day_class) && l.contains(approach)).count(),
                    1
                );
            }
        }
        let f1 = r.scenarios[0].averages.pso.macro_f1 * 100.0;
        assert!(lines[2].contains(&format!("{f1:.2}")));
        // every numeric cell has exactly two decimals
        for line in &lines[1..] {
            for cell in line.split_whitespace().skip(2) {
                let (_, frac) = cell.split_once('.').unwrap();
                assert_eq!(frac.len(), 2, "{cell}");
            }
        }
    }

    #[test]
    fn csv_full_precision() {
        let r = report();
        let csv = render_csv(&r);
        let first = csv.lines().nth(2).unwrap();
        let f1: f64 = first.split(',').nth(4).unwrap().parse().unwrap();
        assert_eq!(f1, r.scenarios[0].averages.pso.macro_f1);
    }

    #[test]
    fn emit_writes_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        let r = report().without_timings();
        emit_report(&r, ReportFormat::Json, &p).unwrap();
        assert_eq!(parse_report(&std::fs::read_to_string(&p).unwrap()).unwrap(), r);
        let err = emit_report(&r, ReportFormat::Table, dir.path().join("missing/x.txt")).unwrap_err();
        assert!(err.is_io());
    }
}
