//! Experiment orchestration: config files with fail-closed parsing and
//! dotted-path overrides, the benchmark matrix (methods x targets x seeds
//! x source counts), per-cell persistence with idempotent re-runs, and
//! report generation.

pub mod ablate;
pub mod config;
pub mod report;
pub mod runner;

use thiserror::Error;

pub use ablate::{run_ablation_matrix, AblationPreset};
pub use config::{
    load_config, parse_config, DatasetConfig, DatasetKind, ExperimentConfig, OutputConfig,
    ProtocolConfig,
};
pub use report::{emit_report, generate_data, inspect_split, ReportStatus};
pub use runner::{run_experiment, RunSummary};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("report error: {0}")]
    Report(String),
    #[error(transparent)]
    Data(#[from] ssdg_data::DataError),
    #[error(transparent)]
    Model(#[from] ssdg_model::ModelError),
    #[error(transparent)]
    Augment(#[from] ssdg_augment::AugmentError),
    #[error(transparent)]
    Trainer(#[from] ssdg_trainer::TrainerError),
    #[error(transparent)]
    Metrics(#[from] ssdg_metrics::MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
