use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod curves;
mod dataset;
mod error;
mod experiment;
mod fit;
mod models;
mod report;
mod sample;

/// Fit, sample and diagnose discrete lifetime models.
#[derive(Debug, Parser)]
#[command(name = "dlife", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit models to a dataset and print a JSON report
    Fit(fit::FitArgs),
    /// Draw a flat CSV sample from a model
    Sample(sample::SampleArgs),
    /// Tabulate cdf, survival and hazard curves as CSV
    Curves(curves::CurvesArgs),
    /// Classify ageing from parameters or a dataset
    Diagnose(fit::DiagnoseArgs),
    /// Run a simulation study and write its artifacts
    Experiment(experiment::ExperimentArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(args) => fit::run(args),
        Command::Sample(args) => sample::run(args),
        Command::Curves(args) => curves::run(args),
        Command::Diagnose(args) => fit::run_diagnose(args),
        Command::Experiment(args) => experiment::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
