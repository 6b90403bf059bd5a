//! Experiment orchestration for dissenting models: a versioned JSON
//! config, seed-replicated global and local sweeps, Table-1 and Table-3
//! style reports, and the `dissent-kit` command set.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod sweep;

pub use commands::{run, Cli, Command};
pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use report::{emit_table, DissentReport, TableFormat, TableStyle};
