//! Text formats.
//!
//! Observed-matrix files carry a `m n` header followed by one `i j value`
//! line per observed entry, with 1-based indices. Blank lines and lines
//! starting with `#` are skipped. Dense matrices are written as CSV with
//! 17 significant digits, which round-trips every `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Result, SetError};
use crate::matrix::{DenseMatrix, ObservedMatrix};

pub fn read_observed(path: impl AsRef<Path>) -> Result<ObservedMatrix> {
    let text = fs::read_to_string(path)?;
    parse_observed(&text)
}

pub fn parse_observed(text: &str) -> Result<ObservedMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (header_line, header) = lines.next().ok_or(SetError::Parse {
        line: 0,
        message: "missing `m n` header".into(),
    })?;
    let dims = parse_fields::<usize>(header, header_line, 2)?;
    let (rows, cols) = (dims[0], dims[1]);
    if rows == 0 || cols == 0 {
        return Err(SetError::Parse {
            line: header_line,
            message: "dimensions must be positive".into(),
        });
    }

    let mut entries = Vec::new();
    for (line, content) in lines {
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(SetError::Parse {
                line,
                message: format!("expected `i j value`, found {} fields", fields.len()),
            });
        }
        let i = parse_index(fields[0], line, rows)?;
        let j = parse_index(fields[1], line, cols)?;
        let value: f64 = fields[2].parse().map_err(|_| SetError::Parse {
            line,
            message: format!("bad value `{}`", fields[2]),
        })?;
        if !value.is_finite() {
            return Err(SetError::NonFinite);
        }
        entries.push((i, j, value));
    }
    ObservedMatrix::from_entries(rows, cols, &entries)
}

fn parse_fields<T: std::str::FromStr>(content: &str, line: usize, expected: usize) -> Result<Vec<T>> {
    let parsed: std::result::Result<Vec<T>, _> = content.split_whitespace().map(str::parse).collect();
    match parsed {
        Ok(v) if v.len() == expected => Ok(v),
        _ => Err(SetError::Parse {
            line,
            message: format!("expected {expected} integers, found `{content}`"),
        }),
    }
}

fn parse_index(field: &str, line: usize, len: usize) -> Result<usize> {
    let one_based: usize = field.parse().map_err(|_| SetError::Parse {
        line,
        message: format!("bad index `{field}`"),
    })?;
    if one_based == 0 || one_based > len {
        return Err(SetError::IndexOutOfRange { index: one_based, len });
    }
    Ok(one_based - 1)
}

/// Serializes the observed entries in the input format.
pub fn format_observed(obs: &ObservedMatrix) -> String {
    let mut out = format!("{} {}\n", obs.nrows(), obs.ncols());
    for (i, j) in obs.mask().indices() {
        // `{:e}` prints the shortest representation that parses back exactly.
        let _ = writeln!(out, "{} {} {:e}", i + 1, j + 1, obs.values()[(i, j)]);
    }
    out
}

pub fn write_observed(path: impl AsRef<Path>, obs: &ObservedMatrix) -> Result<()> {
    fs::write(path, format_observed(obs))?;
    Ok(())
}

pub fn format_dense(x: &DenseMatrix) -> String {
    let mut out = String::new();
    for row in x.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_dense(path: impl AsRef<Path>, x: &DenseMatrix) -> Result<()> {
    fs::write(path, format_dense(x))?;
    Ok(())
}

/// Parses the CSV written by [`format_dense`].
pub fn parse_dense(text: &str) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse()).collect();
        let row = row.map_err(|_| SetError::Parse {
            line: k + 1,
            message: "bad CSV number".into(),
        })?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(SetError::Parse {
                    line: k + 1,
                    message: "ragged CSV row".into(),
                });
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DenseMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}
