//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::config::{load_config, CsiMode, ExperimentKind, ExperimentSpec};
use super::experiment::{run_experiment, RunOptions};
use super::output::write_outputs;
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "ris-rpm", version, about = "Reflection pattern modulation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reproduce one of the figure experiments.
    Reproduce {
        /// Figure number, 2 to 7.
        #[arg(long, value_parser = clap::value_parser!(u8).range(2..=7))]
        fig: u8,
        /// Large trial counts.
        #[arg(long)]
        full: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Run an experiment described by a TOML file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Channel realizations (Monte Carlo draws for figure 2).
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the CSV and JSON files.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Channel knowledge used for the beamforming design.
    #[arg(long, value_enum)]
    csi: Option<CsiArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CsiArg {
    Perfect,
    Estimated,
}

impl Common {
    fn apply(&self, spec: &mut ExperimentSpec) -> Result<()> {
        if let Some(t) = self.trials {
            spec.trials = t;
        }
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        if let Some(c) = self.csi {
            spec.csi = match c {
                CsiArg::Perfect => CsiMode::Perfect,
                CsiArg::Estimated => CsiMode::Estimated,
            };
        }
        spec.validate()
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let (spec, common) = match cli.command {
        Command::Reproduce { fig, full, common } => {
            let kind = ExperimentKind::from_figure(fig).expect("range checked by the parser");
            let mut spec = ExperimentSpec::for_kind(kind, full);
            common.apply(&mut spec)?;
            (spec, common)
        }
        Command::Run { config, common } => {
            let mut spec = load_config(&config)?;
            common.apply(&mut spec)?;
            (spec, common)
        }
    };
    let table = run_experiment(&spec, &RunOptions { workers: common.workers })?;
    let (csv, json) = write_outputs(&table, &common.out)?;
    println!("{}", csv.display());
    println!("{}", json.display());
    Ok(())
}
