use std::path::PathBuf;

use clap::{Parser, Subcommand};

use granuflow_cli::commands;

/// Unsteady flow of water-saturated granular material with a
/// pore-pressure-activated yield stress.
#[derive(Parser)]
#[command(name = "granuflow", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation from a TOML config and write its artifacts.
    Simulate {
        /// Path to the TOML configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the verification property suite and write a report.
    Verify {
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run builtin scenarios, each into its own subdirectory.
    Scenarios {
        /// Comma-separated scenario names; empty or absent runs all.
        #[arg(long)]
        only: Option<String>,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Simulate { config, out } => commands::cmd_simulate(&config, &out),
        Command::Verify { out } => commands::cmd_verify(&out),
        Command::Scenarios { only, out } => commands::cmd_scenarios(only.as_deref(), &out),
    };
    std::process::exit(code);
}
