//! Config-driven experiments: simulate or load pairs, evaluate them, write reports.

mod config;
mod io;
mod runner;

pub use config::{
    apply_env_overrides, load_config, read_config_table, ExperimentConfig, Format, Mode,
    OutputSpec, DEFAULT_OUTCOME_CAP, DEFAULT_TAIL_FRACTION, ENV_PREFIX,
};
pub use io::{
    load_pairs, report_json, write_pairs, write_report, BACKWARD_COLUMNS, FORWARD_COLUMNS,
    GLOBAL_COLUMNS, PAIR_COLUMNS,
};
pub use runner::{evaluate_pairs, experiment_pairs, run_experiment, ExperimentReport, RunMetadata};
