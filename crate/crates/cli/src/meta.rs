//! Provenance sidecars: every artifact gets a `<name>.meta.json` next to it
//! carrying the hash of the configuration that produced it and the seed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
}

impl Provenance {
    pub fn new(command: &str, config: &impl Serialize, seed: u64) -> CliResult<Self> {
        Ok(Self {
            command: command.to_string(),
            config_hash: config_hash(config)?,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        })
    }

    /// Write the sidecar for `artifact`.
    pub fn attach(&self, artifact: &Path) -> CliResult<PathBuf> {
        let path = sidecar_path(artifact);
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}

/// SHA-256 of the compact JSON serialization, hex encoded.
pub fn config_hash(config: &impl Serialize) -> CliResult<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn sidecar_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    artifact.with_file_name(name)
}
