//! Evaluation metrics over operator activity logs and questionnaires.

mod hter;
mod logs;
pub mod ueq;

pub use hter::{edit_distance, hter, hter_text, EditRateReport};
pub use logs::{
    mean_hter, session_breakdown, sessions_csv, summarize_logs, LogSummary, SessionRow, UNASSISTED_MINUTES_PER_CN,
};
pub use ueq::{
    benchmark_all, ueq_benchmark, ueq_score, BenchmarkCategory, BenchmarkConfig, BenchmarkThresholds, ItemMap,
    UeqError, UeqResult, UeqScale,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("reference text is empty; edit rate undefined")]
    EmptyReference,
    #[error("no modified suggestions in the log")]
    NoData,
    #[error("unmatched writing start/finish markers in sessions: {}", sessions.join(", "))]
    MalformedLog { sessions: Vec<String> },
}

/// Reads a JSONL activity log, skipping blank lines.
pub fn read_events_jsonl(data: &str) -> Result<Vec<crate::model::ActivityEvent>, serde_json::Error> {
    data.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
