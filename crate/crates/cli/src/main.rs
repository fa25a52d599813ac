mod config;
mod error;
mod estimate;
mod io;
mod manifest;
mod simulate;
mod theorem;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::{CliError, CliResult};

/// Spectral estimation by relative entropy rate minimization.
#[derive(Debug, Parser)]
#[command(name = "rer", version, about)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, env = "RER_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate a spectral density from sampled data.
    Estimate(estimate::EstimateArgs),
    /// Run one of the seeded simulation studies.
    Simulate(simulate::SimulateArgs),
    /// Compare the partition sums of two spectra with their time-domain rate.
    VerifyTheorem(theorem::TheoremArgs),
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Other(e.into()))?;
    }
    match &cli.command {
        Command::Estimate(args) => estimate::run(args),
        Command::Simulate(args) => simulate::run(args),
        Command::VerifyTheorem(args) => theorem::run(args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
