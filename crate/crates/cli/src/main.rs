//! `atdm`: fit aggregate thermal models of building clusters, in the clear or
//! through the privacy-preserving protocol, and probe what the aggregator
//! could infer.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] atdm_core::model::ModelError),
    #[error(transparent)]
    Estimator(#[from] atdm_core::estimator::EstimatorError),
    #[error(transparent)]
    Protocol(#[from] atdm_core::protocol::ProtocolError),
    #[error(transparent)]
    Adversary(#[from] atdm_core::adversary::AdversaryError),
}

#[derive(Debug, Parser)]
#[command(name = "atdm", version, about = "Aggregate thermal dynamic models with private estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic cluster dataset as CSV.
    Generate(commands::GenerateArgs),
    /// Fit on the training split, in plain or private mode.
    Fit(commands::FitArgs),
    /// Metrics of fitted parameters on the held-out split.
    Evaluate(commands::EvaluateArgs),
    /// Equation and unknown counts for the aggregator's inference problem.
    Counting(commands::CountingArgs),
    /// Perturbed-start attacks on the aggregator's quadratic system.
    Attack(commands::AttackArgs),
    /// Plain vs private fit, parameter by parameter.
    Compare(commands::CompareArgs),
}

fn run(cli: Cli) -> Result<Option<String>, CliError> {
    Ok(match &cli.command {
        Command::Generate(a) => commands::generate(a).map(|_| None)?,
        Command::Fit(a) => Some(commands::fit(a)?),
        Command::Evaluate(a) => Some(commands::evaluate(a)?),
        Command::Counting(a) => Some(commands::counting(a)?),
        Command::Attack(a) => Some(commands::attack(a)?),
        Command::Compare(a) => Some(commands::compare(a)?),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            if let Some(text) = out {
                println!("{text}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
