//! Matrix CSV reading and writing.
//!
//! Rows are comma-separated, row-major, with an optional first row of
//! labels. Values are written with 17 significant digits so every float
//! survives a round trip.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub matrix: DMatrix<f64>,
    pub labels: Option<Vec<String>>,
}

pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Lowercase hex SHA-256 of the input bytes.
pub fn fingerprint(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses a square matrix. `source` names the input in error messages.
pub fn parse_matrix_csv(text: &str, source: &str) -> CliResult<LabeledMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut labels = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::parse(source, line, 1, e.to_string())
        })?;
        let line = record.position().map_or(index as u64 + 1, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Vec<Result<f64, _>> = record.iter().map(|f| f.parse::<f64>()).collect();
        if rows.is_empty() && labels.is_none() && parsed.iter().all(|p| p.is_err()) {
            labels = Some(record.iter().map(str::to_string).collect::<Vec<_>>());
            width = Some(record.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(CliError::parse(
                source,
                line,
                record.len().min(expected) + 1,
                format!("expected {expected} fields, found {}", record.len()),
            ));
        }
        let mut row = Vec::with_capacity(expected);
        for (column, (value, raw)) in parsed.into_iter().zip(record.iter()).enumerate() {
            match value {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(CliError::parse(source, line, column + 1, format!("invalid number '{raw}'")))
                }
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(CliError::parse(source, 1, 1, "no matrix rows"));
    }
    if width != Some(n) {
        return Err(CliError::parse(
            source,
            1,
            1,
            format!("matrix must be square, got {n} rows of {} fields", width.unwrap_or(0)),
        ));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(LabeledMatrix { matrix: DMatrix::from_row_slice(n, n, &flat), labels })
}

/// Reads a matrix CSV and returns it with the file's fingerprint.
pub fn read_matrix_csv(path: &Path) -> CliResult<(LabeledMatrix, String)> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|e| CliError::parse(&path.display().to_string(), 1, 1, e.to_string()))?;
    let parsed = parse_matrix_csv(&text, &path.display().to_string())?;
    Ok((parsed, fingerprint(&bytes)))
}

pub fn matrix_to_csv(m: &DMatrix<f64>, labels: Option<&[String]>) -> String {
    let mut out = String::new();
    if let Some(labels) = labels {
        out.push_str(&labels.join(","));
        out.push('\n');
    }
    for row in m.row_iter() {
        let fields: Vec<String> = row.iter().map(|v| format_value(*v)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}
