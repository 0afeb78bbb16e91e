//! Run management: configuration files, seeded runs in each mode, metrics
//! CSVs, empirical CDFs and EDRL-versus-baseline comparisons.

mod config;
mod metrics;
mod runner;

pub use config::{apply_overrides, load_config, resolve_config, save_config, Mode, RunConfig, ENV_PREFIX};
pub use metrics::{
    compare_run_sets, compare_runs, export_cdf, final_window_mean, read_cdf_csv, read_metrics, series, write_cdf_csv,
    MetricsLog, MetricsRow, RunComparison, SetComparison, Spread, COMPARE_METRIC,
};
pub use runner::{load_policy, run, run_id, run_with_progress, RunSummary};
