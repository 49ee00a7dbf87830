//! CSV tables, JSON results and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_JSON: &str = "results.json";
pub const MANIFEST_JSON: &str = "manifest.json";

/// A CSV table held in memory so it can be hashed before it is written.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))
    }
}

/// Shortest representation that round-trips.
pub fn lin(x: f64) -> String {
    format!("{x}")
}

pub fn db(x: f64) -> String {
    format!("{:.4}", 10.0 * x.log10())
}

pub fn flag(b: bool) -> String {
    u8::from(b).to_string()
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub config: &'a RunConfig,
    pub seed: u64,
    pub tool_version: &'static str,
    pub results_digest: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes the requested artifacts under the configured output directory and
/// returns the paths written.
pub fn emit<R: Serialize>(config: &RunConfig, table: &Table, results: &R) -> Result<Vec<PathBuf>, CliError> {
    let dir = config.out_dir();
    fs::create_dir_all(dir)?;
    let csv = table.to_csv()?;
    let mut written = Vec::new();
    if config.wants("csv") {
        written.push(write(dir, RESULTS_CSV, &csv)?);
    }
    if config.wants("json") {
        let body = serde_json::to_vec_pretty(results)?;
        written.push(write(dir, RESULTS_JSON, &body)?);
        let manifest = Manifest {
            config,
            seed: config.seed(),
            tool_version: env!("CARGO_PKG_VERSION"),
            results_digest: sha256_hex(&csv),
        };
        let mut body = serde_json::to_vec_pretty(&manifest)?;
        body.push(b'\n');
        written.push(write(dir, MANIFEST_JSON, &body)?);
    }
    Ok(written)
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::write(&path, bytes)?;
    Ok(path)
}
