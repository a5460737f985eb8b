//! Metrics, the fixed-threshold baseline and the leave-one-attack-out harness.

mod experiment;
pub mod metrics;
mod report;

pub use experiment::{
    naive_baseline, run_experiment, ApproachResult, CellReport, ExperimentConfig, ExperimentReport, ProtocolConfig,
    ScenarioReport, Summary, Timings, DEFAULT_NAIVE_THRESHOLD,
};
pub use metrics::{
    f1, precision, recall, zero_day_detection_rate, ClassCounts, ClassMetrics, ConfusionCounts, MetricsReport,
};
pub use report::{emit_report, parse_report, render_csv, render_json, render_table, ReportFormat};
