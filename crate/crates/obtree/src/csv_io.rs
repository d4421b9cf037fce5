//! Dataset CSV files: comma separated, one header row, '.' decimals, no quoting.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use obtree_core::Dataset;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("cannot open {path}")]
    Open { path: PathBuf, source: io::Error },
    #[error("{path} is empty")]
    Empty { path: PathBuf },
    #[error("{path} has a header but no data rows")]
    NoRows { path: PathBuf },
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error("row {row}, column '{column}': expected {expected} fields, found {found}")]
    Ragged { row: usize, column: String, expected: usize, found: usize },
    #[error("row {row}, column '{column}': '{value}' is not a number")]
    NonNumeric { row: usize, column: String, value: String },
    #[error("row {row}, column '{column}': non-finite value '{value}'")]
    NonFinite { row: usize, column: String, value: String },
    #[error("response column '{0}' not found in header")]
    MissingResponse(String),
    #[error("the file needs at least one feature column besides the response")]
    NoFeatures,
    #[error(transparent)]
    Dataset(#[from] obtree_core::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Resolves a response column given by header name or zero-based index.
/// Names win over indices when a header cell happens to be numeric.
pub fn resolve_column(header: &[String], spec: &str) -> Result<usize, CsvError> {
    if let Some(k) = header.iter().position(|h| h == spec) {
        return Ok(k);
    }
    match spec.parse::<usize>() {
        Ok(k) if k < header.len() => Ok(k),
        _ => Err(CsvError::MissingResponse(spec.to_string())),
    }
}

/// Column names of the features (header order, response removed) and the dataset.
pub fn load_csv(path: &Path, response: &str) -> Result<(Vec<String>, Dataset), CsvError> {
    let file = File::open(path).map_err(|source| CsvError::Open { path: path.to_path_buf(), source })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).quoting(false).from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(CsvError::Empty { path: path.to_path_buf() });
    }
    let target = resolve_column(&header, response)?;
    if header.len() < 2 {
        return Err(CsvError::NoFeatures);
    }
    let p = header.len() - 1;
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); p];
    let mut y = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| CsvError::Malformed { row, message: e.to_string() })?;
        if record.len() != header.len() {
            let column = header.get(record.len().min(header.len() - 1)).cloned().unwrap_or_default();
            return Err(CsvError::Ragged { row, column, expected: header.len(), found: record.len() });
        }
        let mut j = 0;
        for (c, cell) in record.iter().enumerate() {
            let value = parse_cell(cell, row, &header[c])?;
            if c == target {
                y.push(value);
            } else {
                columns[j].push(value);
                j += 1;
            }
        }
    }
    if y.is_empty() {
        return Err(CsvError::NoRows { path: path.to_path_buf() });
    }
    let names = header.iter().enumerate().filter(|&(c, _)| c != target).map(|(_, h)| h.clone()).collect();
    let dataset = Dataset::from_columns(columns.concat(), y, p)?;
    Ok((names, dataset))
}

fn parse_cell(cell: &str, row: usize, column: &str) -> Result<f64, CsvError> {
    let text = cell.trim();
    let value: f64 = text
        .parse()
        .map_err(|_| CsvError::NonNumeric { row, column: column.to_string(), value: text.to_string() })?;
    if !value.is_finite() {
        return Err(CsvError::NonFinite { row, column: column.to_string(), value: text.to_string() });
    }
    Ok(value)
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Writes `x1..xp` feature columns followed by `y`.
pub fn write_csv<W: Write>(dataset: &Dataset, out: W) -> Result<(), CsvError> {
    let names: Vec<String> = (1..=dataset.p()).map(|j| format!("x{j}")).collect();
    write_csv_named(dataset, &names, "y", out)
}

pub fn write_csv_named<W: Write>(dataset: &Dataset, names: &[String], response: &str, out: W) -> Result<(), CsvError> {
    let mut w = csv::WriterBuilder::new().quote_style(csv::QuoteStyle::Never).from_writer(out);
    let mut header: Vec<&str> = names.iter().map(String::as_str).collect();
    header.push(response);
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(dataset.p() + 1);
    for i in 0..dataset.n() {
        record.clear();
        record.extend((0..dataset.p()).map(|j| fmt_f64(dataset.x(i, j))));
        record.push(fmt_f64(dataset.y(i)));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(dataset: &Dataset, path: &Path) -> Result<(), CsvError> {
    let file = File::create(path)?;
    write_csv(dataset, io::BufWriter::new(file))
}
