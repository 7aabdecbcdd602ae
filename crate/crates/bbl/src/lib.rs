//! File formats, built-in datasets and the command-line front end for `bbl-core`.

pub mod cli;
pub mod datasets;
pub mod error;
pub mod io;
pub mod report;
pub mod reproduce;

pub use error::{CliError, Result};
pub use report::ReportDocument;
