//! Command-line front end for the solver: TOML configuration with a
//! canonical echo and content hash, deterministic artifact writers (CSV,
//! legacy ASCII VTK, JSON manifest), and the three subcommands.

pub mod commands;
pub mod config;
pub mod output;
