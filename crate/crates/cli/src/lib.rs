//! Command-line front end of the `smre` library: configuration, data files,
//! pipeline assembly, threshold tables and evaluation.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;

use clap::{Parser, Subcommand};
use serde_json::Value;

use crate::commands::GenerateArgs;
use crate::config::ConfigArgs;
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(
    name = "smre",
    version,
    about = "Statistical multiresolution estimation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute estimates for one or more data files.
    Run(ConfigArgs),
    /// Build (or find in the cache) the threshold table of a run.
    SimulateQuantiles(ConfigArgs),
    /// Score estimates against a ground truth.
    Evaluate(ConfigArgs),
    /// Write synthetic test data.
    Generate(GenerateArgs),
}

/// Executes a command and returns the JSON records to print, one per line.
pub fn dispatch(cli: &Cli) -> CliResult<Vec<Value>> {
    match &cli.command {
        Command::Run(args) => pipeline::run(&args.resolve()?),
        Command::SimulateQuantiles(args) => {
            Ok(vec![pipeline::simulate_quantiles(&args.resolve()?)?])
        }
        Command::Evaluate(args) => Ok(vec![commands::evaluate(&args.resolve()?)?]),
        Command::Generate(args) => Ok(vec![commands::generate(args)?]),
    }
}
