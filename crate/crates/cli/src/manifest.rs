use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Provenance attached to every output artifact. Contains no timestamps so
/// identical runs produce identical bytes.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: BTreeMap<String, String>,
    /// `sha256:<hex>` of the input trace file.
    pub input_digest: Option<String>,
    pub toolkit_version: String,
    pub seed: Option<u64>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            arguments: BTreeMap::new(),
            input_digest: None,
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
        }
    }

    pub fn arg(mut self, key: &str, value: impl ToString) -> Self {
        self.arguments.insert(key.to_string(), value.to_string());
        self
    }

    pub fn input(mut self, path: &Path) -> Result<Self> {
        self.input_digest = Some(file_digest(path)?);
        Ok(self)
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("hashing input {}", path.display()))?;
    Ok(format!("sha256:{}", hex::encode(Sha256::digest(&bytes))))
}
