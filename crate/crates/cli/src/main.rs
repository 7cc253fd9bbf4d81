//! `coevo`: command-line front end for the coupled behavior-environment
//! model. Subcommands cover trajectory simulation at three layers (exact
//! event-driven, node mean-field, planar), equilibrium reports, limit-cycle
//! detection, feedback-policy comparison, parameter sweeps, and SVG plots.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;
mod pool;
mod svg;

use config::{Config, ConfigError};

#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration (exit 2).
    Config(String),
    /// Numerical or I/O failure at run time (exit 3).
    Runtime(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<coevo_core::CoreError> for CliError {
    fn from(e: coevo_core::CoreError) -> Self {
        use coevo_core::CoreError::*;
        match e {
            Integration { .. } | ImpactOverflow { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "coevo",
    version,
    about = "Coupled behavior-environment model: simulation, analysis, control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat key=value configuration file (dotted keys, # comments).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override the `seed` config key.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Output directory (overrides `out.dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Override any config key, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate or simulate one trajectory (layer = planar|node-mf|abm).
    Simulate,
    /// Report the three equilibria with eigenvalues and classes.
    Equilibria,
    /// Detect convergence to a periodic orbit on a Poincare section.
    Cycle,
    /// Compare impact-feedback policies (policy.N.* config groups).
    Control,
    /// Grid over one or two parameters, one cycle summary row per cell.
    Sweep,
    /// Render a trajectory CSV as an SVG line plot or phase portrait.
    Plot,
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let cfg = Config::resolve(
        cli.config.as_deref(),
        &cli.set,
        cli.seed,
        cli.out.as_deref(),
    )?;
    match cli.command {
        Command::Simulate => commands::simulate(&cfg),
        Command::Equilibria => commands::equilibria_cmd(&cfg).map(|p| vec![p]),
        Command::Cycle => commands::cycle_cmd(&cfg).map(|p| vec![p]),
        Command::Control => commands::control_cmd(&cfg).map(|p| vec![p]),
        Command::Sweep => commands::sweep_cmd(&cfg).map(|p| vec![p]),
        Command::Plot => commands::plot_cmd(&cfg).map(|p| vec![p]),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
