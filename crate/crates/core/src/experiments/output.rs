use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::config::OutputFormat;
use super::sweep::SweepRecord;

const COLUMNS: [&str; 11] = [
    "method",
    "logM",
    "n_s",
    "estimate",
    "ci",
    "theoretical",
    "trials",
    "seed",
    "wall_ms",
    "distortion",
    "error",
];

/// Writes `records` to `path` in the requested format.
pub fn emit_results(records: &[SweepRecord], path: &Path, format: OutputFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        OutputFormat::Csv => write_csv(records, &mut out),
        OutputFormat::Json => write_json(records, &mut out),
    }
    .map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        Error::Format { message, .. } => Error::Format {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// CSV with a fixed header; missing values are empty fields.
pub fn write_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(COLUMNS).map_err(csv_error)?;
    for rec in records {
        w.serialize(rec).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// JSON array of flat objects; missing values are `null`.
pub fn write_json<W: Write>(records: &[SweepRecord], mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, records).map_err(|e| Error::Format {
        path: "<json>".into(),
        message: e.to_string(),
    })?;
    writeln!(out).map_err(|e| Error::io("<json>", e))
}

/// Reads records written by [`write_json`].
pub fn load_json(path: &Path) -> Result<Vec<SweepRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io("<csv>", io),
        other => Error::Format {
            path: "<csv>".into(),
            message: format!("{other:?}"),
        },
    }
}
