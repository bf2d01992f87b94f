//! Library surface of the `mfcov` CLI: configuration schemas, serialization,
//! and the five command implementations, kept callable for tests and
//! embedding.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use commands::{cmd_bench, cmd_estimate, cmd_metric, cmd_pilot, cmd_plan};
pub use error::CliError;
