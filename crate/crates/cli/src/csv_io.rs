//! Numeric CSV tables: rows are time samples, columns are channels.
//!
//! Reading accepts LF or CRLF line endings and one optional header row, which
//! is recognized when any of its fields does not parse as a number. Writing
//! uses 17 significant digits so that a write/read round trip is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use cca_core::SignalMatrix;
use nalgebra::DMatrix;

use crate::error::{CliError, CliResult};

/// Parsed table with its optional header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Option<Vec<String>>,
    /// Row-major data, one entry per sample.
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn n_columns(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Channel-major signal matrix (transpose of the file layout).
    pub fn to_signal(&self) -> CliResult<SignalMatrix> {
        let (t, n) = (self.rows.len(), self.n_columns());
        let m = DMatrix::from_fn(n, t, |i, j| self.rows[j][i]);
        Ok(SignalMatrix::new(m)?)
    }

    /// Row-major square matrix, as written in the file.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let (r, c) = (self.rows.len(), self.n_columns());
        DMatrix::from_fn(r, c, |i, j| self.rows[i][j])
    }
}

/// Parses CSV text. `origin` names the source in error messages.
pub fn parse_table(text: &str, origin: &str) -> CliResult<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::invalid(format!("{origin}: {e}")))?;
        let line = record.position().map_or(k as u64 + 1, |p| p.line());
        if k == 0 && record.iter().any(|f| f.parse::<f64>().is_err()) {
            header = Some(record.iter().map(str::to_owned).collect::<Vec<_>>());
            width = Some(record.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(CliError::invalid(format!(
                "{origin}: ragged row at line {line}: expected {expected} fields, found {}",
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(expected);
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::invalid(format!(
                    "{origin}: non-numeric value {field:?} at line {line}, column {}",
                    j + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::invalid(format!(
                    "{origin}: non-finite value {field:?} at line {line}, column {}",
                    j + 1
                )));
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::invalid(format!("{origin}: no numeric rows")));
    }
    Ok(Table { header, rows })
}

pub fn read_table(path: &Path) -> CliResult<Table> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_table(&text, &path.display().to_string())
}

/// Reads a signal file; fails when it has fewer than `min_channels` columns.
pub fn read_signal(path: &Path, min_channels: usize) -> CliResult<SignalMatrix> {
    let table = read_table(path)?;
    if table.n_columns() < min_channels {
        return Err(CliError::invalid(format!(
            "{}: need at least {min_channels} columns, found {}",
            path.display(),
            table.n_columns()
        )));
    }
    table.to_signal()
}

/// Formats one value with 17 significant digits.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders a signal as CSV text, one sample per line, optional `c1..cn` header.
pub fn format_signal(s: &SignalMatrix, header: bool) -> String {
    let m = s.values();
    let mut out = String::with_capacity(m.len() * 25);
    if header {
        let names: Vec<String> = (1..=m.nrows()).map(|i| format!("c{i}")).collect();
        out.push_str(&names.join(","));
        out.push('\n');
    }
    for t in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", format_value(m[(i, t)]));
        }
        out.push('\n');
    }
    out
}

pub fn write_signal(path: &Path, s: &SignalMatrix, header: bool) -> CliResult<()> {
    write_text(path, &format_signal(s, header))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SignalMatrix {
        let m = DMatrix::from_fn(3, 100, |i, j| {
            let x = ((i * 100 + j) as f64 * 0.7361).sin() * 10f64.powi(i as i32 * 3 - 3);
            if j % 7 == 0 {
                -x
            } else {
                x / 3.0
            }
        });
        SignalMatrix::new(m).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = sample();
        for header in [false, true] {
            let back = parse_table(&format_signal(&s, header), "mem")
                .unwrap()
                .to_signal()
                .unwrap();
            assert_eq!(s.values().shape(), back.values().shape());
            for (a, b) in s.values().iter().zip(back.values().iter()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn writer_uses_lf_and_seventeen_digits() {
        let s = SignalMatrix::new(DMatrix::from_row_slice(2, 1, &[0.1, -2.5])).unwrap();
        assert_eq!(
            format_signal(&s, false),
            "1.0000000000000001e-1,-2.5000000000000000e0\n"
        );
        assert_eq!(
            format_signal(&s, true),
            "c1,c2\n1.0000000000000001e-1,-2.5000000000000000e0\n"
        );
    }

    #[test]
    fn header_detected_and_ignored() {
        let t = parse_table("a,b,c\n1,2,3\n4,5,6\n", "mem").unwrap();
        assert_eq!(t.header, Some(vec!["a".into(), "b".into(), "c".into()]));
        assert_eq!(t.rows, vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        let s = t.to_signal().unwrap();
        assert_eq!(s.channel(1), vec![2.0, 5.0]);
    }

    #[test]
    fn crlf_and_whitespace_accepted() {
        let t = parse_table("1, 2\r\n3 ,4\r\n", "mem").unwrap();
        assert_eq!(t.header, None);
        assert_eq!(t.rows, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn ragged_row_is_named() {
        let err = parse_table("1,2,3\n4,5\n", "mem").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        let err = parse_table("a,b,c\n1,2,3\n4,5,6\n7,8\n", "mem")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 4") && err.contains("found 2"), "{err}");
    }

    #[test]
    fn non_numeric_cell_is_named() {
        let err = parse_table("1,2\n3,x\n", "mem").unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("column 2"), "{err}");
        let err = parse_table("1,2\n3,NaN\n", "mem").unwrap_err().to_string();
        assert!(err.contains("non-finite"), "{err}");
    }

    #[test]
    fn empty_input_rejected() {
        assert!(parse_table("", "mem").is_err());
        assert!(parse_table("a,b\n", "mem").is_err());
    }
}
