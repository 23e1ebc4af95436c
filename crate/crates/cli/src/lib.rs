//! Verification suites and commands behind the `teleham` binary.

pub mod algebra;
pub mod commands;
pub mod error;
pub mod report;
pub mod variational;

pub use error::{CliError, CliResult};
pub use report::{Format, Report, ReportRow};
