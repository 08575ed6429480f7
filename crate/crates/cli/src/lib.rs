//! Command-line front end: batch pipeline runs, simulated experiments,
//! model calibration, Braille rendering, metrics, benchmarks and the live
//! session service.

mod app;
mod commands;
mod error;
pub mod serve;

pub use app::{run, Cli, Command};
pub use error::CliError;
