//! Run manifests: a TOML record of one invocation, written next to its outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// Arguments after the program name, as given.
    pub args: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry_fingerprint: Option<String>,
    /// Input role -> path.
    pub inputs: BTreeMap<String, String>,
    /// Output path -> sha256 of its bytes.
    pub outputs: BTreeMap<String, String>,
    /// Fully resolved parameters, defaults included.
    pub params: toml::Table,
}

impl RunManifest {
    pub fn new(command: &str, args: &[String]) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            args: args.to_vec(),
            geometry_fingerprint: None,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            params: toml::Table::new(),
        }
    }

    pub fn input(&mut self, role: &str, path: &Path) {
        self.inputs
            .insert(role.to_string(), path.display().to_string());
    }

    pub fn param<T: Serialize>(&mut self, key: &str, value: &T) -> Result<()> {
        let value =
            toml::Value::try_from(value).with_context(|| format!("serializing parameter {key}"))?;
        self.params.insert(key.to_string(), value);
        Ok(())
    }

    /// Writes `bytes` to `path` and records its digest.
    pub fn write_output(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs
            .insert(path.display().to_string(), sha256_hex(bytes));
        Ok(())
    }

    /// Saves the manifest next to `primary` and returns its path.
    pub fn save_next_to(&self, primary: &Path) -> Result<PathBuf> {
        let path = manifest_path(primary);
        let text = toml::to_string(self).context("serializing manifest")?;
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}

/// `out/cloud.csv` -> `out/cloud.manifest.toml`.
pub fn manifest_path(primary: &Path) -> PathBuf {
    primary.with_extension("manifest.toml")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
