//! Matrix files. Both encodings store one sample per row; in memory the
//! matrix is transposed to one sample per column.
//!
//! `MVM1` layout: the 4 magic bytes `MVM1`, `u32` LE sample count, `u32` LE
//! feature count, then `samples × features` little-endian `f64`, row-major.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub const MVM1_MAGIC: &[u8; 4] = b"MVM1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFormat {
    #[default]
    Csv,
    Mvm1,
}

impl MatrixFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MatrixFormat::Csv => "csv",
            MatrixFormat::Mvm1 => "mvm",
        }
    }
}

/// Reads a sample-per-row file into a `features × samples` matrix.
pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<DenseMatrix> {
    match format {
        MatrixFormat::Csv => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_csv(&text).map_err(|msg| Error::parse(path, msg))
        }
        MatrixFormat::Mvm1 => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            decode_mvm1(&bytes).map_err(|msg| Error::parse(path, msg))
        }
    }
}

/// Writes a `features × samples` matrix as one sample per row.
pub fn write_matrix(path: &Path, m: &DenseMatrix, format: MatrixFormat) -> Result<()> {
    let bytes = match format {
        MatrixFormat::Csv => format_csv(m).into_bytes(),
        MatrixFormat::Mvm1 => encode_mvm1(m)?,
    };
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn parse_csv(text: &str) -> std::result::Result<DenseMatrix, String> {
    let mut samples: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(width.unwrap_or(0));
        for (field_no, cell) in line.split(',').enumerate() {
            let cell = cell.trim();
            let v: f64 = cell.parse().map_err(|_| {
                format!(
                    "line {}, field {}: cannot parse {cell:?} as a number",
                    line_no + 1,
                    field_no + 1
                )
            })?;
            row.push(v);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(format!(
                    "line {}: expected {w} fields, found {}",
                    line_no + 1,
                    row.len()
                ));
            }
            _ => {}
        }
        samples.push(row);
    }
    let Some(features) = width else {
        return Err("file contains no data".into());
    };
    let n = samples.len();
    Ok(DenseMatrix::from_fn(features, n, |r, c| samples[c][r]))
}

pub fn format_csv(m: &DenseMatrix) -> String {
    let mut out = String::with_capacity(m.rows() * m.cols() * 10);
    for j in 0..m.cols() {
        for r in 0..m.rows() {
            if r > 0 {
                out.push(',');
            }
            // Display for f64 is shortest round-trip, so parsing recovers the bits.
            out.push_str(&m[(r, j)].to_string());
        }
        out.push('\n');
    }
    out
}

pub fn encode_mvm1(m: &DenseMatrix) -> Result<Vec<u8>> {
    let samples = u32::try_from(m.cols())
        .map_err(|_| Error::Dimension(format!("{} samples exceed the MVM1 limit", m.cols())))?;
    let features = u32::try_from(m.rows())
        .map_err(|_| Error::Dimension(format!("{} features exceed the MVM1 limit", m.rows())))?;
    let mut out = Vec::with_capacity(12 + 8 * m.rows() * m.cols());
    out.extend_from_slice(MVM1_MAGIC);
    out.extend_from_slice(&samples.to_le_bytes());
    out.extend_from_slice(&features.to_le_bytes());
    for j in 0..m.cols() {
        for r in 0..m.rows() {
            out.extend_from_slice(&m[(r, j)].to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_mvm1(bytes: &[u8]) -> std::result::Result<DenseMatrix, String> {
    if bytes.len() < 12 {
        return Err(format!("truncated header: {} bytes", bytes.len()));
    }
    if &bytes[..4] != MVM1_MAGIC {
        return Err(format!("bad magic {:?}, expected \"MVM1\"", &bytes[..4]));
    }
    let samples = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let features = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let expected = samples
        .checked_mul(features)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| "header dimensions overflow".to_string())?;
    let body = &bytes[12..];
    if body.len() < expected {
        return Err(format!(
            "truncated body: {samples}x{features} needs {expected} bytes, found {}",
            body.len()
        ));
    }
    if body.len() > expected {
        return Err(format!(
            "{} trailing bytes after {samples}x{features} payload",
            body.len() - expected
        ));
    }
    if samples == 0 || features == 0 {
        return Err(format!("empty matrix {samples}x{features}"));
    }
    let value = |i: usize| f64::from_le_bytes(body[i * 8..i * 8 + 8].try_into().expect("8 bytes"));
    Ok(DenseMatrix::from_fn(features, samples, |r, c| {
        value(c * features + r)
    }))
}

/// One integer code per line. Blank lines are skipped.
pub fn load_labels(path: &Path) -> Result<Vec<i64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text).map_err(|msg| Error::parse(path, msg))
}

pub fn parse_labels(text: &str) -> std::result::Result<Vec<i64>, String> {
    let mut out = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v = line.parse::<i64>().or_else(|_| {
            // tolerate integral floats such as "3.0"
            line.parse::<f64>()
                .ok()
                .filter(|f| f.fract() == 0.0 && f.is_finite())
                .map(|f| f as i64)
                .ok_or_else(|| format!("line {}: cannot parse {line:?} as an integer label", line_no + 1))
        })?;
        out.push(v);
    }
    if out.is_empty() {
        return Err("label file is empty".into());
    }
    Ok(out)
}

pub fn write_labels<T: std::fmt::Display>(path: &Path, labels: &[T]) -> Result<()> {
    let mut text = String::with_capacity(labels.len() * 3);
    for l in labels {
        text.push_str(&l.to_string());
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
