//! Seeded multi-trial experiments, CSV output and SVG plots.

pub mod config;
pub mod output;
pub mod plot;
pub mod run;

pub use config::{load_config, parse_config, EnvSpec, ExperimentConfig, ENV_NAMES};
pub use output::{
    aggregate, correlation_analysis, oracle_rows, raw_csv, run_to_dir, sweep, write_oracle,
    CorrelationRow, OracleRow, RunFiles, SweepOutput,
};
pub use plot::{plot_files, render, PlotKind, PlotOptions, Table};
pub use run::{run, run_trial, run_with_sink, MetricRow, RunOutput, TrialExtras, TrialOutput};
