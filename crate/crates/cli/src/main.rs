//! `agcn`: train, evaluate and inspect adaptive label-graph GCN models.
//!
//! Exit statuses: 0 success, 2 usage or configuration error, 3 input error
//! (unreadable or malformed files), 4 training divergence, 5 gradient check
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

mod commands;
mod config;
mod plot;

use commands::GradCheckOptions;
use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("input: {0}")]
    Input(String),
    #[error("{0}")]
    Divergence(String),
    #[error("gradient check failed: {0}")]
    GradCheck(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Input(_) => 3,
            CliError::Divergence(_) => 4,
            CliError::GradCheck(_) => 5,
        }
    }
}

impl From<agcn_core::Error> for CliError {
    fn from(e: agcn_core::Error) -> Self {
        match e {
            agcn_core::Error::Config(_) => CliError::Config(e.to_string()),
            agcn_core::Error::Divergence { .. } => CliError::Divergence(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "agcn", version, about = "Adaptive label-graph GCN for multi-label classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by commands that read a run configuration.
#[derive(clap::Args, Debug, Clone)]
struct ConfigArgs {
    /// Run configuration (`key = value` lines)
    #[arg(long, short = 'c')]
    config: Option<PathBuf>,
    /// Override a configuration key; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (takes precedence over AGCN_OUTPUT_DIR and the config)
    #[arg(long, short = 'o')]
    output_dir: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, CliError> {
        RunConfig::load(self.config.as_deref(), &self.overrides, self.output_dir.as_deref())
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model; writes a checkpoint, a per-epoch log and the learned graph
    Train(ConfigArgs),
    /// Evaluate a checkpoint (threshold and top-k batteries)
    Eval {
        #[command(flatten)]
        args: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Evaluation set; defaults to the configured `eval`
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Write the raw and normalized label graph of a checkpoint as CSV
    ExportGraph {
        #[command(flatten)]
        args: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Render the label-graph heatmap and, given a training log, loss curves
    Plot {
        #[command(flatten)]
        args: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Training log written by `train`
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Compare taped gradients of the total loss with central differences
    GradCheck {
        #[command(flatten)]
        args: ConfigArgs,
        /// Number of training samples in the probe batch
        #[arg(long, default_value_t = 8)]
        samples: usize,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Generate a synthetic block co-occurrence dataset and a run config
    Synth {
        /// `benchmark` or `default`
        #[arg(long, default_value = "benchmark")]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override a generator setting; repeatable
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, short = 'o')]
        output_dir: Option<PathBuf>,
    },
    /// Train one seeded run per alpha and tabulate test mAP
    SweepAlpha {
        #[command(flatten)]
        args: ConfigArgs,
        /// Comma-separated alpha values (at least two)
        #[arg(long, default_value = "0,0.5,1")]
        alphas: String,
        /// Run the alpha values concurrently
        #[arg(long)]
        parallel: bool,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(args) => commands::train(&args.load()?),
        Command::Eval { args, checkpoint, data } => commands::eval(&args.load()?, &checkpoint, data.as_deref()),
        Command::ExportGraph { args, checkpoint } => commands::export_graph(&args.load()?, &checkpoint),
        Command::Plot { args, checkpoint, log } => commands::plot(&args.load()?, &checkpoint, log.as_deref()),
        Command::GradCheck {
            args,
            samples,
            step,
            tol,
        } => commands::grad_check_cmd(&args.load()?, &GradCheckOptions { samples, step, tol }),
        Command::Synth {
            preset,
            seed,
            overrides,
            output_dir,
        } => {
            let spec = commands::synth_spec(&preset, seed, &overrides)?;
            commands::synth(&spec, &commands::output_dir_or(output_dir, "synth"))
        }
        Command::SweepAlpha { args, alphas, parallel } => {
            let alphas = commands::parse_alphas(&alphas)?;
            commands::sweep_alpha(&args.load()?, &alphas, parallel).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
