use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Diagnostic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    ValidationError,
    NumericalFailure,
    IoError,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::IoError => 1,
            Status::ValidationError => 2,
            Status::NumericalFailure => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEntry {
    pub name: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub library_version: String,
    pub experiment: String,
    pub status: Status,
    pub exit_code: i32,
    pub error: Option<ErrorEntry>,
    pub diagnostics: Vec<Diagnostic>,
    /// The config file as read.
    pub config: serde_json::Value,
    /// System, seed, workers and settings after overrides.
    pub effective: serde_json::Value,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub wall_time_seconds: f64,
    pub artifacts: Vec<ArtifactEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` under `dir` and returns its manifest entry.
pub fn write_artifact(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<ArtifactEntry> {
    fs::write(dir.join(name), bytes)?;
    Ok(ArtifactEntry {
        path: name.into(),
        sha256: sha256_hex(bytes),
        bytes: bytes.len() as u64,
    })
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(dir.join("manifest.json"), text)
    }
}
