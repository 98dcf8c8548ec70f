//! Bit and LLR files.
//!
//! Bits are packed eight per byte, least significant bit first; the bit
//! count lives in a sidecar `<file>.json`. LLR files are raw little-endian
//! `f64` values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub bits: usize,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

pub fn pack(bits: impl IntoIterator<Item = bool>) -> Vec<u8> {
    let mut out = Vec::new();
    for (i, b) in bits.into_iter().enumerate() {
        if i % 8 == 0 {
            out.push(0);
        }
        if b {
            *out.last_mut().unwrap() |= 1 << (i % 8);
        }
    }
    out
}

pub fn unpack(bytes: &[u8], len: usize) -> Result<Vec<bool>, CliError> {
    if bytes.len() != len.div_ceil(8) {
        return Err(CliError::Input(format!(
            "{} bytes cannot hold exactly {len} bits",
            bytes.len()
        )));
    }
    Ok((0..len).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect())
}

pub fn write_bits(
    path: &Path,
    bits: &[bool],
    extra: serde_json::Map<String, serde_json::Value>,
) -> Result<(), CliError> {
    std::fs::write(path, pack(bits.iter().copied()))?;
    let sidecar = Sidecar { bits: bits.len(), extra };
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar).unwrap())?;
    Ok(())
}

pub fn read_bits(path: &Path) -> Result<Vec<bool>, CliError> {
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side)
        .map_err(|e| CliError::Input(format!("{}: {e}", side.display())))?;
    let sidecar: Sidecar = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", side.display())))?;
    unpack(&std::fs::read(path)?, sidecar.bits)
}

pub fn write_llrs(path: &Path, llrs: &[f64]) -> Result<(), CliError> {
    let bytes: Vec<u8> = llrs.iter().flat_map(|x| x.to_le_bytes()).collect();
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn read_llrs(path: &Path) -> Result<Vec<f64>, CliError> {
    let bytes = std::fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(CliError::Input(format!(
            "{}: length {} is not a multiple of 8",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
