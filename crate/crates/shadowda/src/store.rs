//! Run directory: atomic writes, content hashes and stage receipts.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write via a temporary file in the same directory and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Machine-readable record of one stage execution. Paths are relative to
/// the run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Receipt {
    pub stage: String,
    /// Hash of the resolved task and plan.
    pub config: String,
    pub seed: u64,
    /// Stage-specific settings (format, methods, criteria).
    pub params: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub duration_ms: u64,
}

pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: PathBuf) -> Self {
        RunDir { root }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn exists(&self, rel: &str) -> bool {
        self.path(rel).is_file()
    }

    pub fn read(&self, rel: &str) -> Result<Vec<u8>, CliError> {
        std::fs::read(self.path(rel)).map_err(|e| CliError::Stage(format!("reading {rel}: {e}")))
    }

    pub fn write(&self, rel: &str, bytes: &[u8]) -> Result<String, CliError> {
        write_atomic(&self.path(rel), bytes).map_err(|e| CliError::Stage(format!("writing {rel}: {e}")))?;
        Ok(sha256_hex(bytes))
    }

    pub fn hash(&self, rel: &str) -> Result<String, CliError> {
        Ok(sha256_hex(&self.read(rel)?))
    }

    fn receipt_path(stage: &str) -> String {
        format!("receipts/{stage}.json")
    }

    pub fn receipt(&self, stage: &str) -> Result<Option<Receipt>, CliError> {
        let rel = Self::receipt_path(stage);
        if !self.exists(&rel) {
            return Ok(None);
        }
        serde_json::from_slice(&self.read(&rel)?).map(Some).map_err(|e| CliError::Stage(format!("bad receipt {rel}: {e}")))
    }

    pub fn write_receipt(&self, r: &Receipt) -> Result<(), CliError> {
        let bytes = serde_json::to_vec_pretty(r).map_err(|e| CliError::Stage(e.to_string()))?;
        self.write(&Self::receipt_path(&r.stage), &bytes)?;
        Ok(())
    }

    /// True when `prev` was produced from the same config, params and inputs
    /// and its outputs are still on disk unchanged.
    pub fn up_to_date(&self, prev: &Receipt, config: &str, params: &serde_json::Value, inputs: &BTreeMap<String, String>) -> bool {
        prev.config == config
            && &prev.params == params
            && &prev.inputs == inputs
            && prev.outputs.iter().all(|(p, h)| self.exists(p) && self.hash(p).is_ok_and(|x| &x == h))
    }

    /// Read an artifact and check it against the receipt of the stage that
    /// wrote it: the bytes must hash to the recorded output, and the
    /// producer must have run on the same config and manifest.
    pub fn read_checked(&self, rel: &str, producer: &str, config: &str, manifest_hash: Option<&str>) -> Result<Vec<u8>, CliError> {
        let r = self
            .receipt(producer)?
            .ok_or_else(|| CliError::Stage(format!("{rel}: no receipt from stage {producer}; run it first")))?;
        let bytes = self.read(rel)?;
        let h = sha256_hex(&bytes);
        if r.outputs.get(rel) != Some(&h) {
            return Err(CliError::Stage(format!("{rel} does not match the {producer} receipt")));
        }
        if r.config != config {
            return Err(CliError::Stage(format!("{rel} was produced under a different config")));
        }
        if let Some(m) = manifest_hash {
            if producer != "gen-states" && r.inputs.get(MANIFEST) != Some(&m.to_string()) {
                return Err(CliError::Stage(format!("{rel} was produced from a different manifest")));
            }
        }
        Ok(bytes)
    }
}

pub const MANIFEST: &str = "manifest.json";
