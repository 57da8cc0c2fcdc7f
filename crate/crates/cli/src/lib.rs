//! Scenario files, run manifests, CSV writers and the subcommands behind the
//! `gotensor` binary.

pub mod commands;
pub mod error;
pub mod manifest;
pub mod output;
pub mod scenario_file;

pub use error::{CliError, Result};
