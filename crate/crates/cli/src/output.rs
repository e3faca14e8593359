//! Artifact files: CSV or JSON tables and JSON records.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Seventeen significant digits, locale independent.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => fmt_float(*x),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(i) => Value::from(*i),
            Cell::Float(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as u64)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Table { headers: headers.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }
}

/// Files written by one command, relative to the output directory.
pub struct Artifacts {
    dir: PathBuf,
    format: Format,
    pub written: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path, format: Format) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Artifacts { dir: dir.to_path_buf(), format, written: Vec::new() })
    }

    fn record(&mut self, name: String, bytes: Vec<u8>) -> Result<(), CliError> {
        fs::write(self.dir.join(&name), bytes)?;
        self.written.push(name);
        Ok(())
    }

    /// Writes `stem.csv` or `stem.json` depending on the format.
    pub fn table(&mut self, stem: &str, table: &Table) -> Result<(), CliError> {
        match self.format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&table.headers)?;
                for row in &table.rows {
                    w.write_record(row.iter().map(Cell::csv))?;
                }
                let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
                self.record(format!("{stem}.csv"), bytes)
            }
            Format::Json => {
                let records: Vec<Value> = table
                    .rows
                    .iter()
                    .map(|row| {
                        let map: Map<String, Value> = table.headers.iter().cloned().zip(row.iter().map(Cell::json)).collect();
                        Value::Object(map)
                    })
                    .collect();
                self.json(stem, &records)
            }
        }
    }

    /// Writes `stem.json`.
    pub fn json<T: Serialize + ?Sized>(&mut self, stem: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.record(format!("{stem}.json"), bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(fmt_float(2.0 / 3.0), "6.6666666666666663e-1");
        assert_eq!(fmt_float(0.0), "0.0000000000000000e0");
        assert_eq!(fmt_float(-1.5), "-1.5000000000000000e0");
    }

    #[test]
    fn csv_and_json_tables() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new(["step", "outcome", "prob"]);
        t.push(vec![1usize.into(), "a,b".into(), 0.5.into()]);
        let mut a = Artifacts::new(dir.path(), Format::Csv).unwrap();
        a.table("x", &t).unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("x.csv")).unwrap(), "step,outcome,prob\n1,\"a,b\",5.0000000000000000e-1\n");
        let mut a = Artifacts::new(dir.path(), Format::Json).unwrap();
        a.table("x", &t).unwrap();
        let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("x.json")).unwrap()).unwrap();
        assert_eq!(v[0]["outcome"], "a,b");
    }
}
