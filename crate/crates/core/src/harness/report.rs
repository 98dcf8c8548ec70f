//! Result persistence: CSV tables with a commented provenance header, and
//! JSON records carrying the same provenance.
//!
//! The header holds everything needed for a bit-identical re-run (tool
//! version, effective config and its hash, seed, code hash, rule versions)
//! and no timestamps, so identical runs produce identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::rate_adapt::{EXTEND_RULE, PUNCTURE_RULE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub code_hash: Option<String>,
    pub puncture_rule: String,
    pub extend_rule: String,
    /// The effective configuration, flags applied.
    pub config: serde_json::Value,
}

impl Provenance {
    pub fn new<C: Serialize>(config: &C, seed: u64, code_hash: Option<String>) -> Result<Self> {
        let config = serde_json::to_value(config).map_err(json_err)?;
        Ok(Provenance {
            tool: "qcra".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config_hash(&config)?,
            seed,
            code_hash,
            puncture_rule: PUNCTURE_RULE.into(),
            extend_rule: EXTEND_RULE.into(),
            config,
        })
    }
}

/// SHA-256 of the canonical (sorted-key) JSON form of `config`.
pub fn config_hash<C: Serialize>(config: &C) -> Result<String> {
    let value = serde_json::to_value(config).map_err(json_err)?;
    let bytes = serde_json::to_vec(&value).map_err(json_err)?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn json_err(e: serde_json::Error) -> crate::Error {
    crate::Error::Io(format!("json: {e}"))
}

/// Writes `rows` as CSV preceded by `# key: value` provenance lines.
pub fn write_csv<W: Write, T: Serialize>(mut out: W, provenance: &Provenance, rows: &[T]) -> Result<()> {
    writeln!(out, "# tool: {} {}", provenance.tool, provenance.version)?;
    writeln!(out, "# config_hash: {}", provenance.config_hash)?;
    writeln!(out, "# seed: {}", provenance.seed)?;
    if let Some(h) = &provenance.code_hash {
        writeln!(out, "# code_hash: {h}")?;
    }
    writeln!(out, "# puncture_rule: {}", provenance.puncture_rule)?;
    writeln!(out, "# extend_rule: {}", provenance.extend_rule)?;
    writeln!(out, "# config: {}", serde_json::to_string(&provenance.config).map_err(json_err)?)?;
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// The CSV text without its `#` header lines.
pub fn csv_body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JsonRecord<T> {
    pub provenance: Provenance,
    pub results: T,
}

pub fn write_json<W: Write, T: Serialize>(out: W, provenance: &Provenance, results: &T) -> Result<()> {
    let record = JsonRecord {
        provenance: provenance.clone(),
        results,
    };
    serde_json::to_writer_pretty(out, &record).map_err(json_err)
}

/// Writes `<base>.csv` from `rows` and `<base>.json` from `record`.
pub fn save<T: Serialize, R: Serialize>(base: &Path, provenance: &Provenance, rows: &[T], record: &R) -> Result<()> {
    if let Some(dir) = base.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut csv = BufWriter::new(File::create(base.with_extension("csv"))?);
    write_csv(&mut csv, provenance, rows)?;
    csv.flush()?;
    let mut json = BufWriter::new(File::create(base.with_extension("json"))?);
    write_json(&mut json, provenance, record)?;
    json.flush()?;
    Ok(())
}
