//! File formats, caches, reports, parallel sweeps, verification suites and
//! the `momentlab` command line, on top of `momentlab-core`.

pub mod cache;
pub mod cli;
pub mod coeff;
mod error;
pub mod report;
pub mod sweep;
pub mod verify;

pub use error::{AppError, AppResult};
