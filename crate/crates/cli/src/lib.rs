//! Experiment runner for the proximal Newton solver: configuration files,
//! history CSVs, iteration-count grids, semi-smoothness tables and the
//! property suites.

pub mod config;
pub mod error;
pub mod runs;
pub mod suites;

pub use config::{Method, ProblemKind, RunConfig};
pub use error::{CliError, Result};
