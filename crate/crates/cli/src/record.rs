//! Experiment output: one `#`-prefixed JSON header line, then CSV.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const BUILD_ID: &str = env!("CVCOMPILE_BUILD_ID");

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Empty,
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Self::Int(i) => Some(*i as f64),
            Self::Float(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Self::Text(s) => Some(s),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Self::Empty => String::new(),
            Self::Int(i) => i.to_string(),
            Self::Float(x) => format!("{x:e}"),
            Self::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Self::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Self::Int(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Self::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Self::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Self::Text(s)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map_or(Self::Empty, Into::into)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub build: String,
    pub command: String,
    pub seed: u64,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub columns: Vec<String>,
    /// Effective configuration as TOML text; parses back to `config`.
    pub config_toml: String,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub header: Header,
    pub rows: Vec<Vec<Cell>>,
}

impl ExperimentRecord {
    pub fn column(&self, name: &str) -> CliResult<usize> {
        self.header
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| CliError::Config(format!("no column {name}")))
    }

    /// Cell `name` of row `row`. Panics on an unknown column.
    pub fn get(&self, row: usize, name: &str) -> &Cell {
        let i = self.column(name).unwrap_or_else(|e| panic!("{e}"));
        &self.rows[row][i]
    }

    pub fn f64(&self, row: usize, name: &str) -> f64 {
        self.get(row, name).as_f64().unwrap_or(f64::NAN)
    }

    pub fn text(&self, row: usize, name: &str) -> &str {
        self.get(row, name).as_str().unwrap_or("")
    }

    /// Rows whose column `name` holds the text `value`.
    pub fn rows_where<'a>(&'a self, name: &str, value: &'a str) -> impl Iterator<Item = usize> + 'a {
        let i = self.column(name).unwrap_or_else(|e| panic!("{e}"));
        (0..self.rows.len()).filter(move |&r| self.rows[r][i].as_str() == Some(value))
    }

    pub fn write<W: Write>(&self, mut out: W) -> CliResult<()> {
        writeln!(out, "# {}", serde_json::to_string(&self.header)?)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Header and raw CSV rows of a written record.
pub fn read_record<R: BufRead>(mut input: R) -> CliResult<(Header, Vec<Vec<String>>)> {
    let mut first = String::new();
    input.read_line(&mut first)?;
    let json = first.strip_prefix("# ").ok_or_else(|| CliError::Config("record lacks a header line".into()))?;
    let header: Header = serde_json::from_str(json.trim_end())?;
    let mut r = csv::Reader::from_reader(input);
    let rows = r.records().map(|rec| Ok(rec?.iter().map(str::to_string).collect())).collect::<CliResult<_>>()?;
    Ok((header, rows))
}
