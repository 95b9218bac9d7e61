//! `acsf`: experiments for the affine curve shortening flow.

mod commands;
mod config;
mod error;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Config;
use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "acsf",
    version,
    about = "Affine curve shortening flow experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a curve; write the trajectory, summary series and SVG frames.
    Evolve(Common),
    /// Blow down and normalize at area milestones; report how elliptic each is.
    Classify(Common),
    /// Compare the flow with unimodular maps and parabolic rescaling.
    Invariance(Common),
    /// Reconstruct the arrival time on a grid and check its PDE and log-concavity.
    Arrival(Common),
    /// Check the closed-form sphere and ellipsoid solutions in higher dimensions.
    Ndcheck(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of support-function samples (and arrival nodes per side).
    #[arg(long)]
    grid: Option<usize>,
    /// Fraction of the explicit stability limit used per time step.
    #[arg(long)]
    safety: Option<f64>,
}

impl Common {
    fn config(&self) -> Result<Config, CliError> {
        let mut config = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(grid) = self.grid {
            config.grid = grid;
        }
        if let Some(safety) = self.safety {
            config.safety = safety;
        }
        config.validate()?;
        Ok(config)
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let (common, command): (&Common, fn(&Config) -> Result<commands::Outcome, CliError>) =
        match &cli.command {
            Command::Evolve(c) => (c, commands::cmd_evolve),
            Command::Classify(c) => (c, commands::cmd_classify),
            Command::Invariance(c) => (c, commands::cmd_invariance),
            Command::Arrival(c) => (c, commands::cmd_arrival),
            Command::Ndcheck(c) => (c, commands::cmd_ndcheck),
        };
    let config = common.config()?;
    let outcome = command(&config)?;
    let count = outcome.artifacts.len();
    outcome.artifacts.commit(&common.out)?;
    print!("{}", outcome.summary);
    println!("wrote {count} files to {}", common.out.display());
    Ok(outcome.status)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(status) => ExitCode::from(status),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
