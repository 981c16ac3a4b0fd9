//! Command-line front end for copula component analysis: synthetic data with
//! ground truth, separation with a factorial copula fit, and evaluation.

pub mod commands;
pub mod csv_io;
pub mod error;
pub mod schema;

pub use commands::{run, Cli, Command};
pub use error::{CliError, CliResult, EXIT_INVALID, EXIT_NON_CONVERGENCE, EXIT_OK};
