//! File formats, checkpoints, run configuration, reports and the
//! subcommands of the `themefit` tool.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod report;

pub use error::{CliError, Result};
