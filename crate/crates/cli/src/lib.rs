//! Command-line front end: configuration, pipelines and CSV output.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{run, CliError, Command, Summary};
pub use config::{ConfigError, RunConfig};
