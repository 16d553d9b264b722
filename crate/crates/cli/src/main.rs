//! `pars` command-line tool.
//!
//! Exit codes: 0 success, 2 usage (clap), 3 config error, 4 data parse or
//! schema error, 5 divergence guard, 6 unsupported dimension, 7 I/O error,
//! 1 anything else.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pars_core::error::Error as CoreError;

mod commands;
mod runner;

#[derive(Parser)]
#[command(name = "pars", version, about = "Offline-to-online RL laboratory with reward scaling, layer-normalized critics, and infeasible-action penalties")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Run configuration file ([section] key = value); defaults when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for artifacts and the run manifest (must not already
    /// contain a manifest)
    #[arg(long)]
    out: PathBuf,
    /// Override the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress progress output
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Roll out the configured behavior policy and write the dataset
    GenData(CommonArgs),
    /// Offline training on a dataset file
    TrainOffline {
        #[command(flatten)]
        common: CommonArgs,
        /// Dataset file written by gen-data
        #[arg(long)]
        data: PathBuf,
    },
    /// Online fine-tuning from an offline checkpoint
    Finetune {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint directory written by train-offline
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Dataset statistics, region classification, probe critics
    Diagnose {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        data: PathBuf,
        /// Optional trained checkpoint to probe alongside the SARSA critic
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Cone-target regression panels, region statistics, similarity maps
    Didactic(CommonArgs),
    /// Certify the contraction and fixed point of the tabular operator
    TabularCheck(CommonArgs),
    /// Train across the (variant x reward scale x seed) grid
    Ablate(CommonArgs),
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<CoreError>() {
        Some(CoreError::Config { .. }) => 3,
        Some(CoreError::Parse { .. }) | Some(CoreError::Schema { .. }) => 4,
        Some(CoreError::Divergence { .. }) => 5,
        Some(CoreError::UnsupportedDimension(_)) => 6,
        Some(CoreError::Io(_)) => 7,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(common) => runner::run("gen-data", common, None, None, commands::gen_data),
        Command::TrainOffline { common, data } => {
            runner::run("train-offline", common, Some(data), None, commands::train_offline)
        }
        Command::Finetune {
            common,
            data,
            checkpoint,
        } => runner::run("finetune", common, Some(data), Some(checkpoint), commands::finetune),
        Command::Diagnose {
            common,
            data,
            checkpoint,
        } => runner::run("diagnose", common, Some(data), checkpoint, commands::diagnose),
        Command::Didactic(common) => runner::run("didactic", common, None, None, commands::didactic),
        Command::TabularCheck(common) => {
            runner::run("tabular-check", common, None, None, commands::tabular_check)
        }
        Command::Ablate(common) => runner::run("ablate", common, None, None, commands::ablate),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
