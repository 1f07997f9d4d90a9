//! Experiment runner behind the `fairstream` binary.

pub mod args;
pub mod commands;
pub mod error;
pub mod learner;
pub mod output;

pub use args::Cli;
pub use commands::{execute, run_cli};
pub use error::CliError;
