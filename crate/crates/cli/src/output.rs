//! CSV tables and JSON summaries.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::ExperimentConfig;
use crate::experiments::Check;

/// Git revision the binary was built from.
pub const BUILD_ID: &str = env!("INSIDER_LAB_BUILD");

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as u64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// Floats with 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn format_cell(cell: &Cell) -> String {
    match cell {
        Cell::Float(x) => format_float(*x),
        Cell::Int(n) => n.to_string(),
        Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Cell::Text(s) => s.clone(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(format_cell).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }
}

#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub kind: &'static str,
    pub build: &'static str,
    pub verdict: &'static str,
    pub config: &'a ExperimentConfig,
    pub checks: &'a [Check],
    pub results: &'a Map<String, Value>,
}

/// Writes `<dir>/<kind>.csv` and `<dir>/<kind>.json`, returning both paths.
pub fn write_outputs(dir: &Path, kind: &str, csv: &str, summary: &Summary<'_>) -> std::io::Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{kind}.csv"));
    let json_path = dir.join(format!("{kind}.json"));
    std::fs::write(&csv_path, csv)?;
    let mut json = serde_json::to_string_pretty(summary).map_err(std::io::Error::other)?;
    json.push('\n');
    std::fs::write(&json_path, json)?;
    Ok((csv_path, json_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_17_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(-0.17328679513998632), "-1.7328679513998632e-1");
        assert_eq!(format_float(0.0), "0.0000000000000000e0");
        assert_eq!(format_float(f64::NAN), "NaN");
        let x = 1.0 / 3.0;
        assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn csv_quoting() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["u*+0.5χ".into(), 3usize.into()]);
        t.push(vec!["x,y".into(), 1.5.into()]);
        assert_eq!(t.to_csv(), "a,b\nu*+0.5χ,3\n\"x,y\",1.5000000000000000e0\n");
    }
}
