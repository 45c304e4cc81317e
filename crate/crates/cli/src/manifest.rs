//! Run manifests: what ran, with which settings, on which inputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::read(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub seed: u64,
    pub elapsed: Duration,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    /// JSON form with SHA-256 digests of every input and output file.
    pub fn to_json(&self) -> CliResult<Value> {
        let digests = |paths: &[PathBuf]| -> CliResult<Vec<Value>> {
            paths
                .iter()
                .map(|p| {
                    Ok(json!({
                        "path": p.display().to_string(),
                        "sha256": file_digest(p)?,
                    }))
                })
                .collect()
        };
        Ok(json!({
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "versions": {
                "state-lp": env!("CARGO_PKG_VERSION"),
            },
            "elapsed_seconds": self.elapsed.as_secs_f64(),
            "inputs": digests(&self.inputs)?,
            "outputs": digests(&self.outputs)?,
        }))
    }
}
