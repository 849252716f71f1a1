//! Command-line front end for `nllr-core`: JSON experiment configs, CSV
//! output and recovery of user-supplied tensors.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use error::CliError;
