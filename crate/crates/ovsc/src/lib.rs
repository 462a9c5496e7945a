//! File formats, subcommands and the command-line definition for `ovsc`.

pub mod cli;
pub mod commands;
pub mod error;
pub mod ingest;

pub use error::{Error, Result};
