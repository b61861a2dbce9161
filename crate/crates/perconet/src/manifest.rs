//! Run manifests: what was run, with which configuration, and the checksum
//! of every file produced.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::RunError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    pub seed: u64,
    pub workers: usize,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: f64,
    /// Full configuration as TOML.
    pub config: String,
    /// File name (relative to the output directory) to hex SHA-256.
    pub outputs: BTreeMap<String, String>,
}

pub fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn sha256_file(path: &Path) -> Result<String, RunError> {
    let bytes = std::fs::read(path).map_err(|e| RunError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Checksums of the named files in `dir`.
pub fn checksums(dir: &Path, names: &[String]) -> Result<BTreeMap<String, String>, RunError> {
    names.iter().map(|n| Ok((n.clone(), sha256_file(&dir.join(n))?))).collect()
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<(), RunError> {
        crate::io::write_json(&dir.join(MANIFEST_NAME), self)
    }

    pub fn read(path: &Path) -> Result<RunManifest, RunError> {
        crate::io::read_json(path)
    }

    /// Names of outputs whose checksum differs from `other`'s.
    pub fn differing_outputs(&self, other: &RunManifest) -> Vec<String> {
        let mut out: Vec<String> = self
            .outputs
            .iter()
            .filter(|(k, v)| other.outputs.get(*k) != Some(v))
            .map(|(k, _)| k.clone())
            .collect();
        out.extend(other.outputs.keys().filter(|k| !self.outputs.contains_key(*k)).cloned());
        out
    }
}
