//! Front-end for horizon-walk: configuration handling and subcommands.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{dispatch, write_outputs, Command, Outcome};
pub use config::{emit_config, parse_config, RunConfig, FORMAT_VERSION};
pub use error::CliError;
