//! Row-per-signal CSV files.
//!
//! ```text
//! # origin=0.0000000000000000e0 dx=1.0000000000000000e0
//! x0,1.2500000000000000e-1,...
//! x1,...
//! ```
//!
//! The comment line is optional (matrices omit it). Values are written with
//! 17 significant digits, so a write/read/write cycle is byte-stable.

use std::fs;
use std::path::Path;

use peaksharp::{DataMatrix, DenseMatrix, Spectrum};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub origin: f64,
    pub dx: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalTable {
    pub grid: Option<Grid>,
    pub labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl SignalTable {
    pub fn from_data(x: &DataMatrix, prefix: &str) -> Self {
        Self {
            grid: Some(Grid { origin: x.origin(), dx: x.dx() }),
            labels: (0..x.m()).map(|i| format!("{prefix}{i}")).collect(),
            rows: x.rows(),
        }
    }

    pub fn from_spectra(s: &[Spectrum], prefix: &str) -> Self {
        Self {
            grid: s.first().map(|f| Grid { origin: f.origin(), dx: f.dx() }),
            labels: (0..s.len()).map(|i| format!("{prefix}{i}")).collect(),
            rows: s.iter().map(|r| r.values().to_vec()).collect(),
        }
    }

    pub fn from_matrix(a: &DenseMatrix, prefix: &str) -> Self {
        Self {
            grid: None,
            labels: (0..a.rows()).map(|i| format!("{prefix}{i}")).collect(),
            rows: (0..a.rows()).map(|i| a.row(i).to_vec()).collect(),
        }
    }

    pub fn to_data(&self) -> std::result::Result<DataMatrix, peaksharp::Error> {
        let g = self.grid.clone().unwrap_or(Grid { origin: 0.0, dx: 1.0 });
        DataMatrix::from_rows(self.rows.clone(), g.dx, g.origin)
    }

    pub fn to_spectra(&self) -> std::result::Result<Vec<Spectrum>, peaksharp::Error> {
        let g = self.grid.clone().unwrap_or(Grid { origin: 0.0, dx: 1.0 });
        self.rows.iter().map(|r| Spectrum::new(r.clone(), g.dx, g.origin)).collect()
    }

    pub fn to_matrix(&self) -> std::result::Result<DenseMatrix, peaksharp::Error> {
        DenseMatrix::from_rows(&self.rows)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        if let Some(g) = &self.grid {
            out.push_str(&format!("# origin={} dx={}\n", fmt_f64(g.origin), fmt_f64(g.dx)));
        }
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        for (label, row) in self.labels.iter().zip(&self.rows) {
            let mut record = vec![label.clone()];
            record.extend(row.iter().map(|&v| fmt_f64(v)));
            w.write_record(&record).expect("in-memory write");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output"));
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut grid = None;
        let mut body = text;
        if let Some(rest) = text.strip_prefix('#') {
            let (line, tail) = rest.split_once('\n').unwrap_or((rest, ""));
            grid = Some(parse_grid(line.trim(), path)?);
            body = tail;
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(body.as_bytes());
        let first_line = if grid.is_some() { 2 } else { 1 };
        let mut labels = Vec::new();
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let line = first_line + i;
            let record = record.map_err(|e| CliError::parse(path, format!("line {line}: {e}")))?;
            let mut fields = record.iter();
            let label = fields.next().unwrap_or_default().trim().to_string();
            let values = fields
                .enumerate()
                .map(|(j, f)| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| CliError::parse(path, format!("line {line}, value {}: {e}", j + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            if let Some(first) = rows.first().map(Vec::len) {
                if values.len() != first {
                    return Err(CliError::parse(
                        path,
                        format!("line {line} has {} values, expected {first}", values.len()),
                    ));
                }
            }
            labels.push(label);
            rows.push(values);
        }
        if rows.is_empty() {
            return Err(CliError::parse(path, "no data rows"));
        }
        Ok(Self { grid, labels, rows })
    }
}

fn parse_grid(line: &str, path: &Path) -> Result<Grid> {
    let (mut origin, mut dx) = (None, None);
    for part in line.split_whitespace() {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| CliError::parse(path, format!("line 1: expected key=value, got `{part}`")))?;
        let v: f64 = value.parse().map_err(|e| CliError::parse(path, format!("line 1, {key}: {e}")))?;
        match key {
            "origin" => origin = Some(v),
            "dx" => dx = Some(v),
            _ => return Err(CliError::parse(path, format!("line 1: unknown key `{key}`"))),
        }
    }
    match (origin, dx) {
        (Some(origin), Some(dx)) => Ok(Grid { origin, dx }),
        _ => Err(CliError::parse(path, "line 1: comment must carry origin= and dx=")),
    }
}

pub fn read_table(path: &Path) -> Result<SignalTable> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    SignalTable::parse(&text, path)
}

pub fn write_table(path: &Path, table: &SignalTable) -> Result<()> {
    write_text(path, &table.render())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_byte_stable() {
        let t = SignalTable {
            grid: Some(Grid { origin: -1.25, dx: 0.1 }),
            labels: vec!["x0".into(), "x1".into()],
            rows: vec![vec![0.1, 1.0 / 3.0, 2e-300], vec![0.0, 7.0, f64::MIN_POSITIVE]],
        };
        let text = t.render();
        let back = SignalTable::parse(&text, Path::new("t.csv")).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.render(), text);
    }

    #[test]
    fn matrices_have_no_grid_line() {
        let a = DenseMatrix::identity(2);
        let text = SignalTable::from_matrix(&a, "x").render();
        assert!(text.starts_with("x0,"));
        let back = SignalTable::parse(&text, Path::new("a.csv")).unwrap();
        assert_eq!(back.to_matrix().unwrap(), a);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = SignalTable::parse("# origin=0 dx=1\na,1,2\nb,1,x\n", Path::new("bad.csv")).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = SignalTable::parse("a,1,2\nb,1\n", Path::new("bad.csv")).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(SignalTable::parse("# origin=0\na,1\n", Path::new("bad.csv")).is_err());
    }
}
