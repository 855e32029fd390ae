//! Pattern files.
//!
//! `csv`: one pattern per line, comma separated; blank lines and lines starting
//! with `#` are skipped.
//!
//! `f64le`: an ASCII header line `HOPF1 <d> <M>` followed by d·M little-endian
//! f64 values, pattern after pattern.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{HopfieldError, Result};
use crate::hopfield::PatternStore;

const MAGIC: &str = "HOPF1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PatternFormat {
    #[default]
    Csv,
    F64Le,
}

impl fmt::Display for PatternFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PatternFormat::Csv => "csv",
            PatternFormat::F64Le => "f64le",
        })
    }
}

impl FromStr for PatternFormat {
    type Err = HopfieldError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(PatternFormat::Csv),
            "f64le" => Ok(PatternFormat::F64Le),
            other => Err(HopfieldError::InvalidParameter(format!(
                "unknown format `{other}` (csv, f64le)"
            ))),
        }
    }
}

pub fn load_patterns(path: &Path, format: PatternFormat) -> Result<PatternStore> {
    let bytes = fs::read(path)?;
    match format {
        PatternFormat::Csv => {
            let text = String::from_utf8(bytes)
                .map_err(|e| HopfieldError::InvalidData(format!("pattern file is not UTF-8: {e}")))?;
            let rows = parse_csv_rows(&text)?;
            PatternStore::from_patterns(&rows)
        }
        PatternFormat::F64Le => decode_f64le(&bytes),
    }
}

pub fn save_patterns(store: &PatternStore, path: &Path, format: PatternFormat) -> Result<()> {
    let mut out = Vec::new();
    match format {
        PatternFormat::Csv => {
            for col in store.xi().column_iter() {
                let line: Vec<String> = col.iter().map(|v| format!("{v:?}")).collect();
                writeln!(out, "{}", line.join(","))?;
            }
        }
        PatternFormat::F64Le => {
            writeln!(out, "{MAGIC} {} {}", store.dim(), store.len())?;
            for v in store.xi().iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Row-major numeric matrix from a CSV file.
pub fn load_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path)?;
    let rows = parse_csv_rows(&text)?;
    let cols = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Parses `1,2,3` (whitespace and surrounding brackets allowed).
pub fn parse_vector(s: &str) -> Result<Vec<f64>> {
    let body = s.trim().trim_start_matches('[').trim_end_matches(']');
    if body.trim().is_empty() {
        return Err(HopfieldError::EmptyInput);
    }
    parse_line(body, 1)
}

fn parse_line(line: &str, row: usize) -> Result<Vec<f64>> {
    line.split(',')
        .enumerate()
        .map(|(j, field)| {
            let field = field.trim();
            let v: f64 = field.parse().map_err(|_| HopfieldError::Parse {
                row,
                col: j + 1,
                msg: format!("`{field}` is not a number"),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(HopfieldError::InvalidData(format!(
                    "non-finite value `{field}` at row {row}, column {}",
                    j + 1
                )))
            }
        })
        .collect()
}

fn parse_csv_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = parse_line(line, i + 1)?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(HopfieldError::Parse {
                    row: i + 1,
                    col: row.len().min(first.len()) + 1,
                    msg: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(HopfieldError::EmptyInput);
    }
    Ok(rows)
}

fn decode_f64le(bytes: &[u8]) -> Result<PatternStore> {
    if bytes.is_empty() {
        return Err(HopfieldError::EmptyInput);
    }
    let newline = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| HopfieldError::Parse {
        row: 1,
        col: 1,
        msg: "missing header line".into(),
    })?;
    let header = std::str::from_utf8(&bytes[..newline]).map_err(|_| HopfieldError::Parse {
        row: 1,
        col: 1,
        msg: "header is not ASCII".into(),
    })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 || fields[0] != MAGIC {
        return Err(HopfieldError::Parse {
            row: 1,
            col: 1,
            msg: format!("expected header `{MAGIC} <d> <M>`, found `{header}`"),
        });
    }
    let dims: Vec<usize> = fields[1..]
        .iter()
        .enumerate()
        .map(|(k, f)| {
            f.parse().map_err(|_| HopfieldError::Parse {
                row: 1,
                col: k + 2,
                msg: format!("`{f}` is not a count"),
            })
        })
        .collect::<Result<_>>()?;
    let (d, count) = (dims[0], dims[1]);
    if d == 0 || count == 0 {
        return Err(HopfieldError::EmptyInput);
    }
    let body = &bytes[newline + 1..];
    let expected = d
        .checked_mul(count)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| HopfieldError::InvalidData(format!("header dimensions {d} x {count} overflow")))?;
    if body.len() != expected {
        return Err(HopfieldError::InvalidData(format!(
            "expected {expected} payload bytes for {d} x {count}, found {}",
            body.len()
        )));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(HopfieldError::InvalidData(format!(
            "non-finite value in pattern {}, coordinate {}",
            k / d + 1,
            k % d + 1
        )));
    }
    PatternStore::new(DMatrix::from_vec(d, count, values))
}
