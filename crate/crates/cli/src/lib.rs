//! Command-line pipeline around the `mixergm` library: configuration, file
//! formats, roll-call ingestion and the simulation-study harness.

pub mod app;
pub mod config;
pub mod error;
pub mod format;
pub mod harness;
pub mod io;
pub mod rollcall;

pub use app::{run, Cli};
pub use error::{CliError, Result};
