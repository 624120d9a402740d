//! Command-line driver: mesh / validate / simulate / generate / train /
//! evaluate / report, all configured from one TOML file.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use cpd_cli::{commands, config};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "cpd",
    about = "Particle-dynamics fracture simulator and operator-network trainer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the reference mesh and export it.
    Mesh {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the stress-concentration benchmarks against the analytic closures.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run one loading simulation and record its trajectory.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Simulate a whole case family and write the dataset + manifest.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train an operator network on a generated dataset.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the test split of a dataset.
    Evaluate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Re-render charts and summaries from a previous run directory.
    Report {
        /// Run directory produced by another command.
        dir: PathBuf,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<config::Resolved> {
    match path {
        Some(p) => config::load(p),
        None => config::load_default(),
    }
}

fn run() -> Result<i32> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Mesh { config } => commands::cmd_mesh(&load_config(config)?),
        Command::Validate { config } => commands::cmd_validate(&load_config(config)?),
        Command::Simulate { config } => commands::cmd_simulate(&load_config(config)?),
        Command::Generate { config } => commands::cmd_generate(&load_config(config)?),
        Command::Train { config } => commands::cmd_train(&load_config(config)?),
        Command::Evaluate { config } => commands::cmd_evaluate(&load_config(config)?),
        Command::Report { dir } => commands::cmd_report(dir),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
