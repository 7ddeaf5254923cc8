//! Recording-level aggregation, F-score and RMSE metrics, the cross-validation
//! driver, report tables, and bootstrap comparison of two models.

mod bootstrap;
mod crossval;
mod metrics;
mod predictions;
mod report;

pub use bootstrap::{bootstrap_compare, bootstrap_csv, compare_all, BootstrapResult, Metric, DEFAULT_LEVEL, DEFAULT_RESAMPLES};
pub use crossval::{crossval, runs_per_fold, CrossValOptions, CrossValOutput, FoldRun};
pub use metrics::{aggregate_severity, f_scores, majority_vote, rmse, FScores};
pub use predictions::{
    aggregate_recordings, read_predictions, read_predictions_file, write_predictions, write_predictions_file,
    PredictionSet, RecordingPrediction,
};
pub use report::{
    format_cell, format_delta, format_rmse_delta, render_table2, render_table4, report_csv, score_predictions,
    FoldMetrics, MetricsReport,
};
