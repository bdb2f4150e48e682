//! Run manifest: config hash, per-stage timing and checksums of every emitted file.

use super::{io_error, PipelineError};
use crate::solver::cache::{sha256_hex, SOLVER_VERSION};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub seconds: f64,
    pub cache_hits: usize,
    pub cache_misses: usize,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub sha256: String,
    pub bytes: u64,
    /// Command that wrote the file.
    pub stage: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub solver_version: String,
    pub package_version: String,
    pub stages: BTreeMap<String, StageRecord>,
    pub files: BTreeMap<String, FileEntry>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Option<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_NAME)).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Merges a finished stage into the manifest of `dir`, re-checksumming every listed file.
    /// A manifest for a different config is replaced.
    pub fn update(dir: &Path, config_hash: &str, stage: &str, record: StageRecord, written: &[String]) -> Result<Self, PipelineError> {
        let mut m = Self::load(dir)
            .filter(|m| m.config_hash == config_hash)
            .unwrap_or_else(|| Manifest {
                config_hash: config_hash.to_string(),
                solver_version: SOLVER_VERSION.to_string(),
                package_version: env!("CARGO_PKG_VERSION").to_string(),
                stages: BTreeMap::new(),
                files: BTreeMap::new(),
            });
        m.stages.insert(stage.to_string(), record);
        for name in written {
            m.files.insert(
                name.clone(),
                FileEntry {
                    sha256: String::new(),
                    bytes: 0,
                    stage: stage.to_string(),
                },
            );
        }
        let mut files = BTreeMap::new();
        for (name, entry) in std::mem::take(&mut m.files) {
            if let Ok(bytes) = fs::read(dir.join(&name)) {
                files.insert(
                    name,
                    FileEntry {
                        sha256: sha256_hex(&bytes),
                        bytes: bytes.len() as u64,
                        stage: entry.stage,
                    },
                );
            }
        }
        m.files = files;
        let path = dir.join(MANIFEST_NAME);
        let mut text = serde_json::to_vec_pretty(&m).map_err(|e| PipelineError::Io(e.to_string()))?;
        text.push(b'\n');
        fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        Ok(m)
    }

    /// Names of listed files that are missing or whose checksum no longer matches.
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter(|(name, e)| fs::read(dir.join(name)).map(|b| sha256_hex(&b) != e.sha256).unwrap_or(true))
            .map(|(name, _)| name.clone())
            .collect()
    }
}
