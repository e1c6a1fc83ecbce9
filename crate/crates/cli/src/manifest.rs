use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::Config;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub command_line: Vec<String>,
    pub tool_version: String,
    pub timestamp: String,
    pub seed: u64,
    pub config_digest: String,
    pub config: BTreeMap<String, Value>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Per-component seed derived from the run seed and a label.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let h = Sha256::digest(format!("{seed}:{label}").as_bytes());
    u64::from_le_bytes(h[..8].try_into().expect("8 bytes"))
}

impl RunManifest {
    pub fn new(command: &str, cfg: &Config) -> Result<Self> {
        let mut m = Self {
            command: command.to_string(),
            command_line: std::env::args().collect(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            seed: cfg.seed()?,
            config_digest: cfg.digest(),
            config: cfg.values().clone(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        };
        if let Some(p) = cfg.config_path() {
            m.input(p)?;
        }
        Ok(m)
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs
            .insert(path.display().to_string(), file_digest(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs
            .insert(path.display().to_string(), file_digest(path)?);
        Ok(())
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join(format!("manifest_{}.json", self.command));
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
