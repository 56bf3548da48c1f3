//! Instance files, single solves, fee sweeps and the `nzs` command line.

pub mod cli;
pub mod error;
pub mod instance_file;
pub mod run;
pub mod sweep;

pub use error::{BenchError, Result};
