//! Experiment runner for the `dpdg` command: privacy-bound curves, the claim
//! verification suite, training runs and sweeps over ε or gradient noise.
//!
//! Every output file carries the build version, a SHA-256 of the
//! configuration that produced it and the seed, as `#` header lines in CSV
//! files or a `provenance` object in JSON files.

pub mod commands;
pub mod config;
pub mod error;
pub mod provenance;

pub use error::{CliError, CliResult};
