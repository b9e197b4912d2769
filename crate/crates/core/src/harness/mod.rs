//! Replicated experiments: sample paths, regret traces, quantile bands and
//! the CSV/SVG/JSON artifacts of a suite.

mod config;
mod output;
mod replication;
mod suite;

pub(crate) use config::default_quantiles;
pub use config::{ExperimentConfig, KappaMode, PolicyKind};
pub use output::{
    aggregate_quantiles, level_name, load_results_csv, read_results_csv, regret_svg,
    render_regret_svg, save_results_csv, write_results_csv, QuantileTable, SvgStyle,
};
pub use replication::{
    instantaneous_regret, min_signal, offline_phase, play, replication_seed, run_replication,
    warm_starts, OfflineSettings, OfflineSummary, RegretTrace, ReplicationSetup,
};
pub(crate) use suite::map_in_order;
pub use suite::{
    cell_csv_name, config_hash, run_cell, run_suite, CellRecord, CellResults, Manifest,
};
