//! `acam`: reproducible experiments on the aCAM macro simulator.
//!
//! Every subcommand writes its outputs plus a `manifest.toml` into
//! `--out-dir`. Each flag can also be set through an `ACAM_*` environment
//! variable (`--sigma-cmp` is `ACAM_SIGMA_CMP`); flags win over the
//! environment, and both win over `--config`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod io;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acam_core::MacroFile;
use clap::{Args, Parser, Subcommand};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "acam",
    version,
    about = "Analog CAM macro simulator and attention experiments"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Macro configuration file (flat TOML, `version = 1`).
    #[arg(long, global = true, env = "ACAM_CONFIG")]
    pub config: Option<PathBuf>,
    /// Seed for variation sampling and model initialization.
    #[arg(long, global = true, env = "ACAM_SEED")]
    pub seed: Option<u64>,
    /// Worker threads; 1 gives bit-reproducible runs.
    #[arg(long, global = true, env = "ACAM_THREADS", value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
    /// Directory for all output files.
    #[arg(long, global = true, env = "ACAM_OUT_DIR", default_value = "acam-out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a key matrix (or load a saved macro) and run queries.
    Search(commands::search::SearchArgs),
    /// Level confusion matrix and current distributions under variation.
    Montecarlo(commands::montecarlo::MonteCarloArgs),
    /// Closed-form energy and latency cost table.
    Energy(commands::energy::EnergyArgs),
    /// Train the attention model(s) on the synthetic task.
    Train(commands::train::TrainArgs),
    /// Evaluate a saved checkpoint in soft and hardware modes.
    Eval(commands::train::EvalArgs),
}

impl GlobalArgs {
    pub fn threads(&self) -> Option<usize> {
        self.threads.map(|n| n as usize)
    }

    /// The configuration file, or defaults when none is given, with the
    /// global `--seed` applied.
    pub fn load_config(&self) -> CliResult<MacroFile> {
        let mut file = match &self.config {
            Some(path) => read_config(path)?,
            None => MacroFile::default(),
        };
        if let Some(seed) = self.seed {
            file.seed = seed;
        }
        Ok(file)
    }
}

fn read_config(path: &Path) -> CliResult<MacroFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::in_file(path, e))?;
    MacroFile::from_toml_str(&text).map_err(|e| CliError::in_file(path, e))
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.global.threads() {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure thread pool: {e}")))?;
    }
    match cli.command {
        Command::Search(args) => commands::search::run(&cli.global, args),
        Command::Montecarlo(args) => commands::montecarlo::run(&cli.global, args),
        Command::Energy(args) => commands::energy::run(&cli.global, args),
        Command::Train(args) => commands::train::run_train(&cli.global, args),
        Command::Eval(args) => commands::train::run_eval(&cli.global, args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("acam: {e}");
            e.exit_code()
        }
    }
}
