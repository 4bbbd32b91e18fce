//! CSV tables with a JSON metadata sidecar.
//!
//! Every CSV starts with one comment line `# polmod <version> config_hash=<hex>`
//! followed by the header. The sidecar (`<name>.json`) carries the same hash,
//! the resolved configuration and per-artifact metadata. Floats are written
//! in shortest round-trip form so identical inputs give identical bytes.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// One output table and its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    /// File stem, without extension.
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub metadata: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) if x.is_nan() => "nan".into(),
            Cell::Num(x) if x.is_infinite() => if *x > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::Num(x) => format!("{x:e}"),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => u8::from(*b).to_string(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

/// SHA-256 of the compact JSON serialization, hex encoded.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("configuration serializes");
    hex::encode(Sha256::digest(&bytes))
}

pub fn csv_header_comment(hash: &str) -> String {
    format!("# polmod {VERSION} config_hash={hash}")
}

/// Renders an artifact as CSV text.
pub fn render_csv(a: &Artifact, hash: &str) -> io::Result<Vec<u8>> {
    let mut buf = Vec::new();
    buf.extend_from_slice(csv_header_comment(hash).as_bytes());
    buf.push(b'\n');
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(&a.columns)?;
        for row in &a.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
    }
    Ok(buf)
}

pub fn render_sidecar(a: &Artifact, hash: &str, config: &Value) -> Vec<u8> {
    let doc = json!({
        "tool": "polmod",
        "version": VERSION,
        "config_hash": hash,
        "csv": format!("{}.csv", a.name),
        "columns": a.columns,
        "rows": a.rows.len(),
        "metadata": a.metadata,
        "config": config,
    });
    let mut out = serde_json::to_vec_pretty(&doc).expect("sidecar serializes");
    out.push(b'\n');
    out
}

/// Writes `<dir>/<name>.csv` and `<dir>/<name>.json`, creating `dir`.
/// Returns the paths written.
pub fn write_artifacts(
    dir: &Path,
    artifacts: &[Artifact],
    config: &Value,
) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let hash = config_hash(config);
    let mut written = Vec::new();
    for a in artifacts {
        let csv_path = dir.join(format!("{}.csv", a.name));
        fs::write(&csv_path, render_csv(a, &hash)?)?;
        let json_path = dir.join(format!("{}.json", a.name));
        fs::write(&json_path, render_sidecar(a, &hash, config))?;
        written.push(csv_path);
        written.push(json_path);
    }
    Ok(written)
}

/// Reads the config hash from a CSV comment line.
pub fn hash_from_csv(text: &str) -> Option<&str> {
    text.lines().next()?.split("config_hash=").nth(1)
}
