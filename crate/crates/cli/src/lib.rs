//! Command-line client for fair-draw ceremonies.
//!
//! Values and masks never leave the machine before the coordinator reports
//! the reveal phase; until then only the commitment digest is sent.

pub mod args;
pub mod client;
pub mod commands;
pub mod dice;
pub mod error;
pub mod render;
pub mod secrets;

pub use args::Cli;
pub use commands::{run, Io};
pub use error::CliError;
