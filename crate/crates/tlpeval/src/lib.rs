//! Std companion to `tlpeval-core`: CSV formats, the experiment matrix,
//! report files and the `tlpeval` command line.

pub mod cli;
mod error;
pub mod harness;
pub mod io;
pub mod report;

pub use error::{Error, Result};
pub use harness::{run_matrix, ExperimentConfig, ReportMatrix};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
