//! Small CSV helpers. Files are rendered in memory and written in one call
//! so every output file has exactly one writer.

use std::path::Path;

use anyhow::{Context, Result};
use cogbench_core::format::sig12;

use crate::error::CliError;

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.render()?)
    }

    pub fn read(path: &Path) -> Result<Table> {
        let file = path.display().to_string();
        let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {file}"))?;
        let header = rdr
            .headers()
            .map_err(|e| CliError::invalid(&file, Some(1), None, e.to_string()))?
            .iter()
            .map(String::from)
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| CliError::invalid(&file, Some(i + 2), None, e.to_string()))?;
            rows.push(rec.iter().map(String::from).collect());
        }
        Ok(Table { header, rows })
    }

    /// Parses column `col` of every row as a float.
    pub fn floats(&self, path: &Path, col: usize) -> Result<Vec<f64>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.get(col).and_then(|v| v.trim().parse::<f64>().ok()).ok_or_else(|| {
                    CliError::invalid(path.display().to_string(), Some(i + 2), Some(col + 1), "expected a number").into()
                })
            })
            .collect()
    }
}

pub fn num(x: f64) -> String {
    sig12(x)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}
