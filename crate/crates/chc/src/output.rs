//! Study results, CSV tables and run manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::Config;
use crate::error::{Error, Result};

/// A CSV table: header plus rows of already formatted cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Column `name` of row `i` parsed as a float.
    pub fn value(&self, i: usize, name: &str) -> Option<f64> {
        let c = self.header.iter().position(|h| h == name)?;
        self.rows.get(i)?.get(c)?.parse().ok()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| Error::Format {
            what: "csv",
            message: e.to_string(),
        })
    }
}

/// Format a float so that it round-trips.
pub fn f(v: f64) -> String {
    format!("{v:e}")
}

/// One pass/fail assertion of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub detail: String,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            detail: detail.into(),
            passed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StudyOutput {
    /// `(file stem, table)`; the first table is the main result.
    pub tables: Vec<(String, Table)>,
    pub checks: Vec<Check>,
    /// Other artifacts, `(file name, bytes)`.
    pub files: Vec<(String, Vec<u8>)>,
}

impl StudyOutput {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn table(&self, stem: &str) -> Option<&Table> {
        self.tables.iter().find(|(s, _)| s == stem).map(|(_, t)| t)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Write every table as `<dir>/<stem>.csv`, then the other files.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        for (stem, table) in &self.tables {
            let path = dir.join(format!("{stem}.csv"));
            fs::write(&path, table.to_csv()?).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Manifest text: the resolved configuration followed by `meta.*` lines,
/// which the configuration parser accepts and ignores.
pub fn manifest_text(cfg: &Config, workers: usize, timestamp: u64, outputs: &[PathBuf]) -> String {
    let mut text = cfg.to_text();
    let _ = writeln!(text, "meta.version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(text, "meta.timestamp = {timestamp}");
    let _ = writeln!(text, "meta.workers = {workers}");
    for (i, p) in outputs.iter().enumerate() {
        let _ = writeln!(text, "meta.output.{i} = {}", p.display());
    }
    text
}

pub fn write_manifest(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
