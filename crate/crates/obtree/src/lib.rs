//! CSV and JSON IO, experiment report writers and the `obtree` command line,
//! built on `obtree-core`.

pub mod cli;
pub mod csv_io;
pub mod report;

pub use csv_io::{load_csv, write_csv, CsvError};
pub use report::{write_report, Report};
