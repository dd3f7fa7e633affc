//! Config-driven experiment runner for `branch-exponent-core`.
//!
//! A JSON document names a model, a command and its parameters; [`run`]
//! executes it and writes JSON and CSV result files.

pub mod config;
pub mod error;
pub mod run;
pub mod runner;
pub mod verify;

pub use config::{emit, parse_config, Command, RunConfig};
pub use error::{exit, CliError, Result};
pub use run::{budget_from_env, run, RunOptions, BUDGET_ENV};
pub use runner::Parallel;
