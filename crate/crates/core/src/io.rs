//! Matrix files and the JSON report schema.
//!
//! Two matrix formats are supported:
//!
//! * CSV: one sample per line, comma-separated finite decimals, every line
//!   with the same number of fields. Blank lines are ignored.
//! * Raw binary: the bytes `VNEM`, a version byte `1`, little-endian `u64`
//!   row and column counts, then `n·d` little-endian `f64` values in
//!   row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{DiagnosticsReport, DisentanglementSummary, IsotropySummary};
use crate::error::{Error, Result};
use crate::repr::RepresentationMatrix;
use crate::trainer::Dataset;

pub const MAGIC: &[u8; 4] = b"VNEM";
pub const BINARY_VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixFormat {
    /// Binary if the file starts with the magic bytes, CSV otherwise.
    Auto,
    Csv,
    Bin,
}

impl std::str::FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "csv" => Ok(Self::Csv),
            "bin" | "binary" => Ok(Self::Bin),
            other => Err(Error::InvalidConfig(format!(
                "unknown matrix format '{other}' (expected auto, csv or bin)"
            ))),
        }
    }
}

pub fn load_matrix(path: impl AsRef<Path>, format: MatrixFormat) -> Result<RepresentationMatrix> {
    let bytes = fs::read(path)?;
    parse_matrix(&bytes, format)
}

pub fn parse_matrix(bytes: &[u8], format: MatrixFormat) -> Result<RepresentationMatrix> {
    match format {
        MatrixFormat::Bin => parse_binary(bytes),
        MatrixFormat::Csv => parse_csv_bytes(bytes),
        MatrixFormat::Auto if bytes.starts_with(MAGIC) => parse_binary(bytes),
        MatrixFormat::Auto => parse_csv_bytes(bytes),
    }
}

fn parse_csv_bytes(bytes: &[u8]) -> Result<RepresentationMatrix> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        location: format!("byte offset {}", e.valid_up_to()),
        message: "input is neither VNEM binary nor UTF-8 text".into(),
    })?;
    parse_csv(text)
}

pub fn parse_csv(text: &str) -> Result<RepresentationMatrix> {
    let mut values = Vec::new();
    let mut cols: Option<usize> = None;
    let mut rows = 0;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut found = 0;
        for (c, field) in line.split(',').enumerate() {
            let field = field.trim();
            let x: f64 = field.parse().map_err(|_| Error::Parse {
                location: format!("line {line_no}, column {}", c + 1),
                message: format!("'{field}' is not a number"),
            })?;
            if !x.is_finite() {
                return Err(Error::NonFinite {
                    what: format!("'{field}' at line {line_no}, column {}", c + 1),
                });
            }
            values.push(x);
            found += 1;
        }
        match cols {
            None => cols = Some(found),
            Some(expected) if expected != found => {
                return Err(Error::NonRectangular {
                    line: line_no,
                    expected,
                    found,
                });
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Parse {
        location: "line 1".into(),
        message: "no data rows".into(),
    })?;
    RepresentationMatrix::new(Array2::from_shape_vec((rows, cols), values).expect("counted"))
}

pub fn parse_binary(bytes: &[u8]) -> Result<RepresentationMatrix> {
    let parse_err = |offset: usize, message: String| Error::Parse {
        location: format!("byte offset {offset}"),
        message,
    };
    if bytes.len() < HEADER_LEN {
        return Err(parse_err(bytes.len(), format!("header needs {HEADER_LEN} bytes")));
    }
    if &bytes[..4] != MAGIC {
        return Err(parse_err(0, "missing VNEM magic bytes".into()));
    }
    if bytes[4] != BINARY_VERSION {
        return Err(parse_err(4, format!("unsupported version {}", bytes[4])));
    }
    let read_u64 = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let n = read_u64(5);
    let d = read_u64(13);
    let count = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| usize::try_from(c).ok())
        .ok_or_else(|| parse_err(5, format!("shape {n}x{d} is too large")))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != count {
        return Err(parse_err(
            HEADER_LEN,
            format!("expected {count} payload bytes for {n}x{d}, found {}", payload.len()),
        ));
    }
    let (n, d) = (n as usize, d as usize);
    let mut values = Vec::with_capacity(n * d);
    for (k, chunk) in payload.chunks_exact(8).enumerate() {
        let x = f64::from_le_bytes(chunk.try_into().unwrap());
        if !x.is_finite() {
            return Err(Error::NonFinite {
                what: format!("{x} at row {}, column {} (byte offset {})", k / d, k % d, HEADER_LEN + 8 * k),
            });
        }
        values.push(x);
    }
    RepresentationMatrix::new(Array2::from_shape_vec((n, d), values).expect("length checked"))
}

/// CSV text using the shortest decimal that reads back to the same `f64`.
pub fn to_csv(m: &RepresentationMatrix) -> String {
    let mut out = String::new();
    for row in m.view().rows() {
        let fields: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn to_binary(m: &RepresentationMatrix) -> Vec<u8> {
    let (n, d) = m.shape();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * n * d);
    out.extend_from_slice(MAGIC);
    out.push(BINARY_VERSION);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(d as u64).to_le_bytes());
    for x in m.view().iter() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn write_matrix(path: impl AsRef<Path>, m: &RepresentationMatrix, format: MatrixFormat) -> Result<()> {
    match format {
        MatrixFormat::Bin => fs::write(path, to_binary(m))?,
        MatrixFormat::Csv | MatrixFormat::Auto => fs::write(path, to_csv(m))?,
    }
    Ok(())
}

/// Inputs with the class label appended as a final column.
pub fn dataset_matrix(data: &Dataset) -> Result<RepresentationMatrix> {
    let (n, d) = data.inputs.dim();
    let mut m = Array2::zeros((n, d + 1));
    m.slice_mut(ndarray::s![.., ..d]).assign(&data.inputs);
    for (i, &y) in data.labels.iter().enumerate() {
        m[[i, d]] = y as f64;
    }
    RepresentationMatrix::new(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub tool_version: String,
    pub seed: u64,
    /// Unix seconds; `null` unless requested, so reports are reproducible.
    pub timestamp: Option<u64>,
    pub n: usize,
    pub d: usize,
}

/// The on-disk analysis report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub meta: ReportMeta,
    pub entropy: f64,
    /// `log10 λ`, descending; `null` marks eigenvalues dropped as zero.
    pub spectrum_log10: Vec<Option<f64>>,
    pub rank_surrogate: usize,
    pub rank_bound_gap: f64,
    pub isotropy: IsotropySummary,
    pub disentanglement: Option<DisentanglementSummary>,
    pub dead_units: usize,
}

impl ReportFile {
    pub fn new(report: DiagnosticsReport, seed: u64, timestamp: Option<u64>, shape: (usize, usize)) -> Self {
        Self {
            meta: ReportMeta {
                tool_version: crate::TOOL_VERSION.to_string(),
                seed,
                timestamp,
                n: shape.0,
                d: shape.1,
            },
            entropy: report.entropy.entropy,
            spectrum_log10: report.spectrum_log10,
            rank_surrogate: report.rank_surrogate,
            rank_bound_gap: report.rank_bound_gap,
            isotropy: report.isotropy,
            disentanglement: report.disentanglement,
            dead_units: report.dead_units,
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Writes JSON to `path`, or to stdout when `path` is `None`.
pub fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = to_json(value)?;
    match path {
        Some(p) => fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}
