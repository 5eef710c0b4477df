//! Command-line driver for the convergence, locking, zero-storage and
//! single-run experiments.

pub mod config;
pub mod run;

pub use config::{Cli, Command, ConfigError, Format, RunConfig};
pub use run::{dispatch, RunError};
