//! Run manifests written next to every output set.
//!
//! The manifest carries wall-clock timestamps, so it is the one output file
//! that differs between otherwise identical runs.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScenarioRef {
    /// `None` for the built-in scenario.
    pub path: Option<String>,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub scenario: ScenarioRef,
    pub seed: u64,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<OutputEntry>,
}

impl RunManifest {
    pub fn new(command: Vec<String>, scenario: ScenarioRef, seed: u64, started_unix: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            scenario,
            seed,
            started_unix,
            finished_unix: started_unix,
            outputs: Vec::new(),
        }
    }

    /// Hashes each named file in `dir` and writes the manifest there.
    pub fn write(mut self, dir: &Path, files: &[String]) -> Result<()> {
        for file in files {
            let path = dir.join(file);
            let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
            self.outputs.push(OutputEntry {
                file: file.clone(),
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
            });
        }
        self.finished_unix = unix_now();
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self)?;
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    }
}
