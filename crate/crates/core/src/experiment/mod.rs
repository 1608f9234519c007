//! The full grid: preprocess and register each log, split, reduce the
//! training side, train every predictor and score it on the fixed test set.

mod config;
mod report;
mod run;

pub use config::{normalize_factors, ExperimentConfig, LogConfig, SplitConfig};
pub use report::{
    emit_report, mark_group, read_results, write_tables, ResultSummary, FAILED_CELL,
    RESULT_COLUMNS, TABLE_PLACES,
};
pub use run::{run_experiment, CellKey, CellStatus, RunResult, Timings, PARTIAL_RESULTS};
