//! Experiment configuration, certainty-equivalent sweeps and CSV output for
//! the `jumpsignal` command-line tool.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use experiment::{run_experiment, run_simulation, ExperimentTable, McRow, Row};
pub use output::{emit_csv, emit_meta, render_csv};
