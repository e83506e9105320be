//! `molgen`: train, sample and evaluate molecule generators.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 runtime failure (I/O,
//! non-finite loss). Log verbosity comes from `MOLGEN_LOG` (e.g. `info`, `debug`).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{EvaluateArgs, Failure, TrainArgs};

#[derive(Parser)]
#[command(name = "molgen", version, about = "Molecule generators: graph GAN and normalizing flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model described by a JSON run config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample molecules from a checkpoint, one SMILES per line.
    Generate {
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 6400)]
        count: usize,
        /// Defaults to the checkpoint seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validity, uniqueness and novelty of generated files, or of fresh samples per seed.
    Evaluate {
        generated: Vec<PathBuf>,
        /// Training set used for novelty.
        #[arg(long)]
        training: PathBuf,
        /// SMILES column when the training set is CSV.
        #[arg(long)]
        column: Option<String>,
        /// Sample from this checkpoint once per seed in `--seeds`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 6400)]
        count: usize,
        /// Report path prefix; writes `<out>.txt` and `<out>.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the contents of a checkpoint.
    InspectCheckpoint { checkpoint: PathBuf },
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Train { config, seed, out } => {
            let path = commands::train(&TrainArgs { config, seed, out })?;
            println!("{}", path.display());
        }
        Command::Generate { checkpoint, count, seed, out } => commands::generate(&checkpoint, count, seed, &out)?,
        Command::Evaluate { generated, training, column, checkpoint, seeds, count, out } => {
            commands::evaluate(&EvaluateArgs { generated, training, column, checkpoint, seeds, count, out })?;
        }
        Command::InspectCheckpoint { checkpoint } => print!("{}", commands::inspect(&checkpoint)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MOLGEN_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
