//! Run manifests: everything needed to reproduce a run's result files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};
use crate::io::{json_bytes, read_bytes, sha256_hex};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    /// `design` inputs are re-read by a replay; `config` files are not, since
    /// the resolved config is stored in the manifest.
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

impl InputDigest {
    pub fn new(role: &str, path: &Path, sha256: &str) -> Self {
        Self {
            role: role.to_string(),
            path: path.to_path_buf(),
            sha256: sha256.to_string(),
        }
    }

    pub fn verify(&self) -> CliResult<()> {
        let found = sha256_hex(&read_bytes(&self.path)?);
        if found != self.sha256 {
            return Err(CliError::Input(format!(
                "{} changed since the run (sha256 {} vs recorded {})",
                self.path.display(),
                found,
                self.sha256
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    /// Worker cap requested for the run; results do not depend on it.
    pub threads: Option<usize>,
    /// The fully resolved configuration, defaults included.
    pub config: Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub duration_secs: f64,
}

impl RunManifest {
    pub fn read(path: &Path) -> CliResult<Self> {
        let bytes = read_bytes(path)?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, dir: &Path) -> CliResult<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, json_bytes(self)?).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
