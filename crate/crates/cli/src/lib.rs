//! Library side of the `tvmfm` command-line tool: CSV ingestion, config
//! parsing, the estimation pipeline and the subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;

pub use error::{CliError, CliResult};
