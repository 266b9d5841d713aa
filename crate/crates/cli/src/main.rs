//! `cemlab`: batch front-end for the electrode solvers.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Context;
use config::RunConfig;
use error::CliError;
use output::OutDir;

#[derive(Parser)]
#[command(
    name = "cemlab",
    version,
    about = "Electrode-edge singularities: exact oracle, FEM and fits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Progress messages on stderr.
    #[arg(long)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Exact solution on the disc or the half-plane.
    Oracle(Common),
    /// Finite element solve with fitted edge exponents.
    Fem(Common),
    /// Power-law fit of `dist,value` samples from a CSV file.
    Fit(Common),
    /// Density error and exponent fits over a sequence of meshes.
    Convergence(Common),
    /// Wedge corner exponent, FEM against the prediction and the oracle.
    Corner(Common),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, run): (&Common, fn(&Context) -> Result<(), CliError>) = match &cli.command {
        Command::Oracle(c) => (c, commands::cmd_oracle),
        Command::Fem(c) => (c, commands::cmd_fem),
        Command::Fit(c) => (c, commands::cmd_fit),
        Command::Convergence(c) => (c, commands::cmd_convergence),
        Command::Corner(c) => (c, commands::cmd_corner),
    };
    let config = RunConfig::load(&common.config)?;
    let out = OutDir::create(&common.out, common.verbose)?;
    run(&Context {
        config: &config,
        out: &out,
        verbose: common.verbose,
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e
                .to_string()
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ")
                .to_owned();
            eprintln!("{}", CliError::config("arguments", first).line());
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.code() as u8)
        }
    }
}
