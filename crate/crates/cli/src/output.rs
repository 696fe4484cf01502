//! CSV tables and the run manifest.

use std::cmp::Ordering;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// Version of the CSV layouts written by this crate. Bump on any change to
/// file names, columns or their meaning.
pub const SCHEMA_VERSION: u32 = 1;

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn cmp_key(&self, other: &Cell) -> Ordering {
        match (self, other) {
            (Cell::Int(a), Cell::Int(b)) => a.cmp(b),
            (Cell::Float(a), Cell::Float(b)) => a.total_cmp(b),
            (Cell::Text(a), Cell::Text(b)) => a.cmp(b),
            (Cell::Bool(a), Cell::Bool(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Cell::Empty => 0,
            Cell::Bool(_) => 1,
            Cell::Int(_) => 2,
            Cell::Float(_) => 3,
            Cell::Text(_) => 4,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        // Seeds use the full 64 bits; print them unsigned.
        Cell::Text(v.to_string())
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

/// A table destined for `<name>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    /// Leading columns that form the sort key.
    pub key_len: usize,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&'static str], key_len: usize) -> Self {
        assert!(key_len <= columns.len());
        Self {
            name: name.to_string(),
            columns: columns.to_vec(),
            key_len,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    /// Stable sort on the key columns.
    pub fn sort(&mut self) {
        let k = self.key_len;
        self.rows.sort_by(|a, b| {
            a[..k]
                .iter()
                .zip(&b[..k])
                .map(|(x, y)| x.cmp_key(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        });
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    /// Sorts and writes the table into `dir`.
    pub fn write(&mut self, dir: &Path) -> Result<PathBuf, CliError> {
        self.sort();
        let path = dir.join(self.file_name());
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(path)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub columns: Vec<&'static str>,
    pub rows: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub lbo_cli: &'static str,
    pub lbo_core: &'static str,
}

/// Record of one run, written as `manifest.json` next to the tables.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub experiment: String,
    pub schema_version: u32,
    pub seed: u64,
    pub jobs: usize,
    pub full: bool,
    pub config: serde_json::Value,
    pub versions: Versions,
    pub wall_time_seconds: f64,
    pub outputs: Vec<OutputRecord>,
    /// Trials that ended on a numerical failure.
    pub numerical_failures: Vec<String>,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

pub fn versions() -> Versions {
    Versions {
        lbo_cli: env!("CARGO_PKG_VERSION"),
        lbo_core: lbo_core::VERSION,
    }
}
