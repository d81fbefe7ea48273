//! Metrics, stratified cross-validation, grid search and report rendering.

mod cv;
mod grid;
mod metrics;
mod report;

pub use cv::{
    run_cv, run_cv_with_plan, CvOptions, EvalReport, FoldResult, SelectionSummary, Standardizer,
};
pub use grid::{grid_search, nested_cv, CellScore, GridSearchResult, GridSpec, SelectionMode};
pub use metrics::{compute_metrics, ConfusionMatrix, MetricSet};
pub use report::{model_name, report_csv, strategy_columns, summary_table};
