//! Self-describing record of a run directory.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::energy::EnergyBreakdown;
use crate::error::{FnlsError, Result};

/// A file written by the run, relative to the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Orbital dumps and occupations of a state, enough to recompute its energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateRecord {
    pub orbitals: Vec<String>,
    pub occupations: Vec<f64>,
    /// Whether the state belongs to the free problem (no centers).
    #[serde(default)]
    pub free: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperationSummary {
    pub name: String,
    pub converged: bool,
    pub status: String,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<EnergyBreakdown>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateRecord>,
    /// Free-form numbers specific to the operation.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub detail: serde_json::Value,
}

impl OperationSummary {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            converged: true,
            status: "ok".into(),
            iterations: 0,
            residual: None,
            energy: None,
            state: None,
            detail: serde_json::Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    /// Fully resolved configuration.
    pub config: RunConfig,
    pub seed: u64,
    pub started: String,
    pub finished: String,
    pub operations: Vec<OperationSummary>,
    pub artifacts: Vec<Artifact>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// Recomputes the checksum of every artifact under `dir`; returns the
    /// paths that are missing or differ.
    pub fn verify_checksums(&self, dir: &Path) -> Vec<String> {
        self.artifacts
            .iter()
            .filter(|a| match std::fs::read(dir.join(&a.path)) {
                Ok(bytes) => sha256_hex(&bytes) != a.sha256 || bytes.len() as u64 != a.bytes,
                Err(_) => true,
            })
            .map(|a| a.path.clone())
            .collect()
    }

    /// Every state recorded by the operations.
    pub fn states(&self) -> impl Iterator<Item = (&OperationSummary, &StateRecord)> {
        self.operations
            .iter()
            .filter_map(|op| op.state.as_ref().map(|s| (op, s)))
    }
}

pub fn parse_manifest_str(text: &str) -> Result<RunManifest> {
    serde_json::from_str(text).map_err(|e| FnlsError::Parse(e.to_string()))
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    parse_manifest_str(&std::fs::read_to_string(path)?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Artifact entry for bytes already written to `dir/name`.
pub fn artifact(name: &str, bytes: &[u8]) -> Artifact {
    Artifact {
        path: name.to_string(),
        sha256: sha256_hex(bytes),
        bytes: bytes.len() as u64,
    }
}
