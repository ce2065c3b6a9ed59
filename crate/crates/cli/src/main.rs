//! Batch CLI for the geomorphic-prior susceptibility pipeline. Stages are
//! composable subcommands that persist their outputs as ASCII grids and CSV
//! files, so any step can be inspected or resumed.
//!
//! Exit codes: 0 success, 1 computation error, 2 usage or I/O error.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Usage;

#[derive(Parser)]
#[command(
    name = "geoprior",
    version,
    about = "DEM-derived geomorphic priors, slope-unit features, small-sample classifiers, and evaluation protocols"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic scenes (DEM + slope units) and planted inventories
    #[command(subcommand)]
    Synth(commands::synth::SynthCommand),
    /// Condition a DEM and derive flow, accumulation, slope, and streams
    Hydro(commands::hydro::HydroArgs),
    /// Joint-CDF pixel prior and per-slope-unit gpk from hydro outputs
    Prior(commands::prior::PriorArgs),
    /// Assemble the slope-unit feature table (gpk + zonal stats + covariates)
    Features(commands::features::FeaturesArgs),
    /// Cross-validation or learning-curve evaluation over a feature table
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Ensemble susceptibility index and five-level classification
    Map(commands::map::MapArgs),
    /// Grid search over slope thresholds and buffer widths
    Sensitivity(commands::sensitivity::SensitivityArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => commands::synth::run(args),
        Command::Hydro(args) => commands::hydro::run(args),
        Command::Prior(args) => commands::prior::run(args),
        Command::Features(args) => commands::features::run(args),
        Command::Evaluate(args) => commands::evaluate::run(args),
        Command::Map(args) => commands::map::run(args),
        Command::Sensitivity(args) => commands::sensitivity::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code(&err)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> ExitCode {
    for cause in err.chain() {
        if cause.downcast_ref::<Usage>().is_some() {
            return ExitCode::from(2);
        }
        if let Some(e) = cause.downcast_ref::<geoprior::Error>() {
            return match e {
                geoprior::Error::Io { .. } | geoprior::Error::Parse { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return ExitCode::from(2);
        }
    }
    ExitCode::from(1)
}
