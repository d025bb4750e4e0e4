//! Experiment orchestration: configuration, the run loop wrapper, metric
//! export and step-size search.
//!
//! Gradient norms in every [`MetricRow`] are computed from the exact full
//! gradient at the current model, never from a compressed estimate, and the
//! metric computation itself is not charged to the bit ledger.

mod config;
mod experiment;
mod metrics;

pub use config::RunConfig;
pub use experiment::{
    grid_configs, grid_search, json_path, min_grad_norm, parse_grid, run_all, run_experiment, run_on, summarize,
    write_trace, ExperimentFailure, ExperimentOutput, GridPoint, GridResult, DEFAULT_ALPHA_GRID,
};
pub use metrics::{
    export_csv, export_json, extract, read_csv, read_json, write_csv, Column, MetricRow, RunRecord, RunSummary,
    CSV_HEADER,
};
