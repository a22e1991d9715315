//! Configuration, experiment runs, result files and the command line.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod output;

pub use config::{load_config, parse_config, ExperimentKind, ExperimentSpec, Series};
pub use experiment::{run_experiment, run_experiment_detailed, ResultTable, RunOptions, TrialMatrix};
pub use output::write_outputs;
