//! Experiment driver for `quasilattice-core`: reads a TOML experiment file,
//! runs one command, and writes `<command>.csv` plus `report.txt`.
//!
//! Exit statuses: 0 when every assertion held, 1 when one failed, 2 for
//! configuration or precondition errors.

pub mod audit;
pub mod commands;
pub mod config;
pub mod error;
pub mod exec;
pub mod output;

pub use commands::{run, Command, RunOptions};
pub use config::ExperimentConfig;
pub use error::CliError;
pub use exec::RayonExecutor;
pub use output::Outcome;
