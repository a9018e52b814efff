//! CSV and JSON rendering.

use clap::ValueEnum;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// A flat record with a fixed column order.  `HEADER` must list the field
/// names in declaration order so empty tables still get a header.
pub trait Row: Serialize {
    const HEADER: &'static [&'static str];
}

pub fn csv<T: Row>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    let other = |e: csv::Error| CliError::Other(e.to_string());
    w.write_record(T::HEADER).map_err(other)?;
    for r in rows {
        w.serialize(r).map_err(other)?;
    }
    w.into_inner().map_err(|e| CliError::Other(e.to_string()))
}

pub fn json<T: Serialize + ?Sized>(v: &T) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(v).map_err(|e| CliError::Other(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

/// One compact JSON object per line.
pub fn json_lines<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r).map_err(|e| CliError::Other(e.to_string()))?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn table<T: Row>(rows: &[T], f: Format) -> Result<Vec<u8>, CliError> {
    match f {
        Format::Csv => csv(rows),
        Format::Json => json(rows),
    }
}
