//! Mode cache container: one JSON header line, then little-endian f64 pairs.

use super::SolverError;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::Path;

pub const SOLVER_VERSION: &str = concat!("microcavity-", env!("CARGO_PKG_VERSION"), "-bem1");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheHeader {
    pub key: String,
    pub shape: crate::geometry::EllipseSpec,
    pub alpha: f64,
    pub polarization: crate::geometry::Polarization,
    pub kr: [f64; 2],
    pub nodes: usize,
    pub mesh: MeshSpec,
    pub quantum_numbers: Option<(u32, u32)>,
    #[serde(default)]
    pub payload: Payload,
    pub count: usize,
    pub checksum: String,
    pub solver_version: String,
}

/// What the complex payload holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    /// ψ on the mesh points.
    #[default]
    Field,
    /// ψ then ∂ψ/∂ν on the boundary nodes.
    BoundaryDensities,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub target: usize,
    pub n: usize,
    pub h: f64,
    pub offset: [f64; 2],
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Content hash of any serializable solver input description.
pub fn cache_key<T: Serialize>(inputs: &T) -> String {
    let json = serde_json::to_vec(inputs).expect("cache inputs serialize");
    sha256_hex(&json)
}

fn payload(field: &[C64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(field.len() * 16);
    for v in field {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

/// Fills `count` and `checksum` and writes the container.
pub fn write_mode_cache(path: &Path, mut header: CacheHeader, field: &[C64]) -> Result<CacheHeader, SolverError> {
    let body = payload(field);
    header.count = field.len();
    header.checksum = sha256_hex(&body);
    let mut bytes = serde_json::to_vec(&header).map_err(|e| SolverError::Cache(e.to_string()))?;
    bytes.push(b'\n');
    bytes.extend_from_slice(&body);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| SolverError::Cache(e.to_string()))?;
    }
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| SolverError::Cache(e.to_string()))?;
    f.write_all(&bytes).map_err(|e| SolverError::Cache(e.to_string()))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| SolverError::Cache(e.to_string()))?;
    Ok(header)
}

pub fn read_mode_cache(path: &Path) -> Result<(CacheHeader, Vec<C64>), SolverError> {
    let bytes = fs::read(path).map_err(|e| SolverError::Cache(format!("{}: {e}", path.display())))?;
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| SolverError::Cache("missing header line".into()))?;
    let header: CacheHeader =
        serde_json::from_slice(&bytes[..split]).map_err(|e| SolverError::Cache(e.to_string()))?;
    let body = &bytes[split + 1..];
    if body.len() != header.count * 16 {
        return Err(SolverError::Cache(format!("payload has {} bytes, expected {}", body.len(), header.count * 16)));
    }
    if sha256_hex(body) != header.checksum {
        return Err(SolverError::Cache("checksum mismatch".into()));
    }
    let field = body
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            C64::new(re, im)
        })
        .collect();
    Ok((header, field))
}
