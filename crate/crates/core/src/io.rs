//! CSV and JSON files for matrices, models and truths.
//!
//! Matrices are plain CSV, one row per line, with an optional header line.
//! `NA`, `NaN` and empty fields in a response file mark missing entries.
//! Numbers are written with 17 significant digits so they round-trip.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::data::Mask;
use crate::error::{Error, Result};

fn is_missing(field: &str) -> bool {
    matches!(field, "" | "NA" | "na" | "NaN" | "nan")
}

/// A numeric matrix with the positions of missing fields.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvMatrix {
    /// Missing fields are stored as 0.
    pub values: DMatrix<f64>,
    /// `None` when no field was missing.
    pub mask: Option<Mask>,
}

/// Parses CSV text. A first line with any non-numeric, non-missing field is
/// taken as a header. Rows and columns in errors are 1-based file positions.
pub fn parse_matrix_csv(text: &str) -> Result<CsvMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    let mut width = None;
    for (i, rec) in reader.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| Error::Csv {
            row: line,
            column: 0,
            message: e.to_string(),
        })?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let parsed: Vec<std::result::Result<Option<f64>, usize>> = rec
            .iter()
            .enumerate()
            .map(|(j, f)| {
                if is_missing(f) {
                    Ok(None)
                } else {
                    f.parse::<f64>().map(Some).map_err(|_| j + 1)
                }
            })
            .collect();
        if i == 0 && parsed.iter().any(|r| r.is_err()) {
            // header
            width = Some(rec.len());
            continue;
        }
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(Error::Csv {
                row: line,
                column: rec.len().min(w) + 1,
                message: format!("expected {w} fields, found {}", rec.len()),
            });
        }
        let mut row = Vec::with_capacity(w);
        for (j, r) in parsed.into_iter().enumerate() {
            match r {
                Ok(Some(v)) if !v.is_finite() => {
                    return Err(Error::Csv {
                        row: line,
                        column: j + 1,
                        message: format!("non-finite value `{}`", &rec[j]),
                    })
                }
                Ok(v) => row.push(v),
                Err(col) => {
                    return Err(Error::Csv {
                        row: line,
                        column: col,
                        message: format!("not a number: `{}`", &rec[j]),
                    })
                }
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    let m = width.unwrap_or(0);
    if n == 0 || m == 0 {
        return Err(Error::Csv {
            row: 1,
            column: 1,
            message: "no data rows".into(),
        });
    }
    let values = DMatrix::from_fn(n, m, |i, j| rows[i][j].unwrap_or(0.0));
    let any_missing = rows.iter().flatten().any(|v| v.is_none());
    let mask = any_missing.then(|| DMatrix::from_fn(n, m, |i, j| rows[i][j].is_some()));
    Ok(CsvMatrix { values, mask })
}

/// Reads a matrix that may contain missing fields.
pub fn read_matrix_csv(path: &Path) -> Result<CsvMatrix> {
    parse_matrix_csv(&fs::read_to_string(path)?)
}

/// Reads a matrix in which every field must be present.
pub fn read_dense_csv(path: &Path) -> Result<DMatrix<f64>> {
    let m = read_matrix_csv(path)?;
    if let Some(mask) = &m.mask {
        let k = mask.iter().position(|&b| !b).expect("mask has a missing entry");
        let (nr, _) = mask.shape();
        return Err(Error::Csv {
            row: k % nr + 1,
            column: k / nr + 1,
            message: format!("missing value in {}", path.display()),
        });
    }
    Ok(m.values)
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV text for a matrix; `None` entries of `mask` are written as `NA`.
pub fn matrix_to_csv(m: &DMatrix<f64>, mask: Option<&Mask>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            if mask.is_some_and(|h| !h[(i, j)]) {
                out.push_str("NA");
            } else {
                out.push_str(&fmt_f64(m[(i, j)]));
            }
        }
        out.push('\n');
    }
    out
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`,
/// so readers never see a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let result = (|| -> Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>, mask: Option<&Mask>) -> Result<()> {
    atomic_write(path, matrix_to_csv(m, mask).as_bytes())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    atomic_write(path, s.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
