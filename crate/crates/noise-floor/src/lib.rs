//! Command-line front end, CSV/JSON file formats and the Monte Carlo
//! harness for `noise-floor-core`.

pub mod cli;
pub mod error;
pub mod io;
pub mod montecarlo;
pub mod report;

pub use error::{CsvError, Error, Result};
