//! Command-line front end: CSV ingestion, run configurations and manifests,
//! report and sweep serialization.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod format;

pub use error::{CliError, Result};
