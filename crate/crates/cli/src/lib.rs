//! IO, study driver and command-line front end for state-dependent sieve
//! local projections.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod output;
pub mod panel_io;
pub mod parallel;

pub use error::{CliError, CliResult};
