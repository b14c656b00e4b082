//! Report output: number formatting, atomic file writes and the JSON
//! envelope shared by every command.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ledger::Ledger;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "ORLICZ_OUTPUT_DIR";

/// Fifteen significant digits, round-trippable enough for comparisons.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    format!("{v:.14e}")
}

/// Directory from [`OUTPUT_DIR_ENV`], else the current directory.
pub fn output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never observe a partial report.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::Data(format!("{}: {e}", dir.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::Data(e.to_string()))?;
    tmp.write_all(bytes).map_err(|e| Error::Data(e.to_string()))?;
    tmp.persist(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// `{"command": ..., "ledger": ..., "result": ...}`.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub command: &'a str,
    pub ledger: &'a Ledger,
    pub result: T,
}

pub fn to_json<T: Serialize>(command: &str, ledger: &Ledger, result: T) -> Result<String> {
    serde_json::to_string_pretty(&Envelope { command, ledger, result }).map_err(|e| Error::Data(e.to_string()))
}

/// Rows of numbers as CSV with a header.
pub fn csv_string(header: &[&str], rows: &[Vec<f64>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Data(e.to_string());
    w.write_record(header).map_err(io)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Data(format!("row has {} fields, header {}", row.len(), header.len())));
        }
        w.write_record(row.iter().map(|&v| fmt_num(v))).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}
