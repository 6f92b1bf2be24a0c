//! Experiment orchestration: config, the day-level stream simulation, and
//! report emission.

pub mod config;
mod report;
mod run;

use std::path::Path;

pub use config::{
    AnovaUnit, DatasetConfig, DatasetSource, ExperimentConfig, ExperimentSection, FilesConfig, ModelSection,
};
pub use report::{
    aggregate, emit_reports, ensure_writable, read_daily, read_queries, recompute_reports, AggregateRow, DatasetInfo,
    RunManifest, AGGREGATE_FILE, BURDEN_FILE, CENTRALITY_CORRELATION_FILE, CENTRALITY_HEATMAP_FILE, DAILY_FILE,
    DERIVED_FILES, MANIFEST_FILE, QUERIES_FILE, ROLLING_FILE, SIGNIFICANCE_FILE, TRADEOFF_FILE,
};
pub use run::{run_experiment, BootstrapLog, IsolationAudit, MetricRecord, RunResult, UnitFailure};

use crate::dataio::DataError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {path}: {message}")]
    Io { path: String, message: String },
    #[error("data: {0}")]
    Data(#[from] DataError),
    #[error("report: {0}")]
    Report(String),
}

impl HarnessError {
    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        Self::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    /// Short category tag used as the machine-parsable prefix of CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Io { .. } => "io",
            Self::Data(_) => "data",
            Self::Report(_) => "report",
        }
    }

    /// The message without the kind prefix, on a single line.
    pub fn single_line(&self) -> String {
        let text = match self {
            Self::Config(m) | Self::Report(m) => m.clone(),
            Self::Io { path, message } => format!("{path}: {message}"),
            Self::Data(e) => e.to_string(),
        };
        text.split_whitespace().collect::<Vec<_>>().join(" ")
    }
}
