//! Run manifests: what was run, with which settings, and what it wrote.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::jobs::Job;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub job: Job,
    pub tool_version: String,
    /// Outputs never depend on thread count or wall clock.
    pub deterministic: bool,
    /// Hash of command, configuration and tool version.
    pub hash: String,
    /// Photon cutoff per mode, when the job has one.
    pub truncation: Option<usize>,
    pub wall_time_s: f64,
    /// Artifact name to the file written and its SHA-256.
    pub outputs: BTreeMap<String, OutputRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    /// Relative to the manifest's directory; `None` for stdout.
    pub file: Option<String>,
    pub sha256: String,
}

/// SHA-256 over the canonical JSON of the job and the tool version.
pub fn job_hash(job: &Job) -> String {
    let canonical = serde_json::to_string(&(job, TOOL_VERSION)).expect("job serialises");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

pub fn file_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(job: &Job, wall_time_s: f64) -> Self {
        Self {
            command: job.command().to_string(),
            job: job.clone(),
            tool_version: TOOL_VERSION.to_string(),
            deterministic: true,
            hash: job_hash(job),
            truncation: job.truncation(),
            wall_time_s,
            outputs: BTreeMap::new(),
        }
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        let m: Self = serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        if m.hash != job_hash(&m.job) {
            return Err(CliError::config("manifest hash does not match its job"));
        }
        Ok(m)
    }
}

/// `<dir>/manifest.json` for outputs written into `dir`.
pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}
