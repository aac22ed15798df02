//! Command-line runner: configuration, subcommands and artifact output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{cmd_check, cmd_solve, cmd_sweep, Overrides};
pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "multibump",
    version,
    about = "Multibump nodal solutions of indefinite semilinear Dirichlet problems"
)]
pub struct Cli {
    /// Output directory (overrides `output.directory`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Seed of the restart generator (overrides `solver.rng_seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the hypotheses and print the constants.
    Check { config: PathBuf },
    /// Minimize at one μ and write solution.csv and report.json.
    Solve {
        config: PathBuf,
        /// Penalty parameter (default: last entry of `parameters.mu`).
        #[arg(long)]
        mu: Option<f64>,
    },
    /// Run the μ-sweep, the limit problems and the concentration table.
    Sweep {
        config: PathBuf,
        /// Only solve the two limit problems and write limit.json.
        #[arg(long)]
        limit_only: bool,
    },
}

/// Runs `cli`, returning the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let overrides = |mu| Overrides {
        mu,
        out: cli.out.clone(),
        seed: cli.seed,
    };
    let result = match &cli.command {
        Command::Check { config } => cmd_check(config, out),
        Command::Solve { config, mu } => cmd_solve(config, &overrides(*mu), out),
        Command::Sweep { config, limit_only } => {
            cmd_sweep(config, &overrides(None), *limit_only, out)
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
