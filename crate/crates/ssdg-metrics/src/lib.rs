//! Diagnostics over training logs: pseudo-label accuracy and
//! overconfidence curves, plus aggregation of benchmark results into
//! per-method / per-target tables.

mod rates;
mod record;
mod table;

use thiserror::Error;

pub use rates::{overconfidence_rate, pseudo_label_accuracy};
pub use record::{
    curve_export, read_metric_log, write_metric_record, CurveSeries, MetricRecord,
};
pub use table::{aggregate, RunResult, ResultsTable};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("missing grid cell: {0}")]
    MissingCell(String),
    #[error("metric log parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
