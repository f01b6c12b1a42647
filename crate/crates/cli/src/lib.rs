//! Command-line front end for the evanescent-wave trap simulator.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{cmd_characterize, cmd_ensemble, cmd_potential, cmd_trajectory, exit, CliError};
pub use config::{ConfigError, RunConfig};
