//! Experiment reports as one JSON line plus a flat CSV mirror.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use obtree_core::experiment::{ImpurityReport, PruningReport, RateReport};
use serde::Serialize;

use crate::csv_io::fmt_f64;

/// Any report the `experiment` subcommand can produce.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Report {
    Rate(RateReport),
    Pruning(PruningReport),
    Impurity(ImpurityReport),
}

impl Report {
    /// Number of asserted bound violations; reported-only comparisons count as zero.
    pub fn violations(&self) -> usize {
        match self {
            Report::Rate(r) if r.asserted => r.violations,
            Report::Rate(_) | Report::Pruning(_) => 0,
            Report::Impurity(r) => r.violations,
        }
    }

    pub fn set_wall_time(&mut self, secs: f64) {
        let slot = match self {
            Report::Rate(r) => &mut r.wall_time_secs,
            Report::Pruning(r) => &mut r.wall_time_secs,
            Report::Impurity(r) => &mut r.wall_time_secs,
        };
        *slot = Some(secs);
    }

    /// Flat table for plotting: a header and rows of plain fields.
    pub fn table(&self) -> (Vec<&'static str>, Vec<Vec<String>>) {
        match self {
            Report::Rate(r) => rate_table(r),
            Report::Pruning(r) => pruning_table(r),
            Report::Impurity(r) => impurity_table(r),
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn rate_table(r: &RateReport) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let header = vec!["depth", "leaf_count", "train_error", "excess", "bound", "bound_holds", "imse", "imse_std_err"];
    let rows = r
        .rows
        .iter()
        .map(|row| {
            vec![
                row.depth.to_string(),
                row.leaf_count.to_string(),
                fmt_f64(row.train_error),
                fmt_f64(row.excess),
                opt(row.bound),
                row.bound_holds.map(|b| b.to_string()).unwrap_or_default(),
                fmt_f64(row.imse),
                fmt_f64(row.imse_std_err),
            ]
        })
        .collect();
    (header, rows)
}

fn pruning_table(r: &PruningReport) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let header = vec!["noise_std", "replicate", "lambda", "leaf_count", "holdout_error", "imse", "selected"];
    let mut rows = Vec::new();
    for run in &r.runs {
        for row in &run.table {
            rows.push(vec![
                fmt_f64(run.noise_std),
                run.replicate.to_string(),
                fmt_f64(row.lambda),
                row.leaf_count.to_string(),
                fmt_f64(row.holdout_error),
                fmt_f64(row.imse),
                (row.lambda == run.lambda_star).to_string(),
            ]);
        }
    }
    (header, rows)
}

fn impurity_table(r: &ImpurityReport) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let header = vec!["node_id", "depth", "node_size", "excess_risk", "weight", "g_norm", "oracle_decrease", "lower_bound", "margin"];
    let rows = r
        .nodes
        .iter()
        .map(|n| {
            let m = &n.margin;
            vec![
                n.node_id.to_string(),
                n.depth.to_string(),
                m.node_size.to_string(),
                fmt_f64(m.excess_risk),
                fmt_f64(m.weight),
                fmt_f64(m.g_norm),
                fmt_f64(m.oracle_decrease),
                fmt_f64(m.lower_bound),
                fmt_f64(m.margin),
            ]
        })
        .collect();
    (header, rows)
}

/// Writes `value` as a single compact JSON line.
pub fn write_json_line<T: Serialize, W: Write>(value: &T, mut out: W) -> io::Result<()> {
    serde_json::to_writer(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()
}

pub fn write_table<W: Write>(header: &[&str], rows: &[Vec<String>], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().quote_style(csv::QuoteStyle::Never).from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// `out.jsonl` gets `out.csv` as its mirror; other names get `.csv` appended.
pub fn mirror_path(path: &Path) -> PathBuf {
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl" | "json") => path.with_extension("csv"),
        _ => {
            let mut s = path.as_os_str().to_owned();
            s.push(".csv");
            PathBuf::from(s)
        }
    }
}

/// Writes the JSON line to `path` and the CSV mirror next to it.
pub fn write_report(report: &Report, path: &Path) -> anyhow::Result<PathBuf> {
    write_json_line(report, BufWriter::new(File::create(path)?))?;
    let mirror = mirror_path(path);
    let (header, rows) = report.table();
    write_table(&header, &rows, BufWriter::new(File::create(&mirror)?))?;
    Ok(mirror)
}
