//! File formats and commands behind the `gridstate` binary.

pub mod commands;
pub mod error;
mod numfmt;
pub mod report;
pub mod schema;
pub mod trajectory;

pub use error::{CliError, CliResult};
