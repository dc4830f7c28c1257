//! Report rows, tables and the JSON summary.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use ncprob::harness::Gap;
use ncprob::linalg::C64;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliResult;

/// One bound check: `lhs ≤ rhs` at sweep size `n` and point `z`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub kind: String,
    pub n: usize,
    pub z_re: f64,
    pub z_im: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl Row {
    pub fn new(kind: impl Into<String>, n: usize, z: C64, gap: Gap) -> Self {
        Row {
            kind: kind.into(),
            n,
            z_re: z.re,
            z_im: z.im,
            lhs: gap.lhs,
            rhs: gap.rhs,
            pass: gap.holds(),
        }
    }
}

/// A plain CSV table; `header: None` prints bare records.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub records: Vec<Vec<String>>,
}

impl Table {
    pub fn with_header(cols: &[&str]) -> Self {
        Table {
            header: Some(cols.iter().map(|s| s.to_string()).collect()),
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, record: Vec<String>) {
        self.records.push(record);
    }
}

/// What a subcommand produced. The table (if any) goes to `--out`; rows go
/// to `--out` when there is no table and to `--rows` otherwise.
#[derive(Debug, Default)]
pub struct Outcome {
    pub table: Option<Table>,
    pub rows: Vec<Row>,
    pub summary: Map<String, Value>,
}

impl Outcome {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.pass).count()
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }
}

fn sink(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn write_table(table: &Table, path: Option<&Path>) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(sink(path)?);
    if let Some(h) = &table.header {
        w.write_record(h)?;
    }
    for r in &table.records {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rows(rows: &[Row], path: Option<&Path>) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(sink(path)?);
    if rows.is_empty() {
        w.write_record(["kind", "n", "z_re", "z_im", "lhs", "rhs", "pass"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary(summary: &Value, path: &Path) -> CliResult<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, summary)?;
    writeln!(f)?;
    Ok(())
}

/// Formats a real number for tables: shortest round-trip form.
pub fn num(x: f64) -> String {
    format!("{x}")
}
