use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Written once per run, next to its outputs. Contains no timestamps so a
/// rerun with the same inputs produces the same bytes.
#[derive(Debug, Default, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name, enough to rerun the command.
    pub args: Vec<String>,
    pub config: BTreeMap<String, String>,
    /// Input path to lowercase hex sha256 of its contents.
    pub inputs: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            args: std::env::args().skip(1).collect(),
            ..Self::default()
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let digest = Sha256::digest(&bytes);
        let hex = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.inputs.insert(path.display().to_string(), hex);
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.config.insert(key.into(), value.to_string());
    }

    /// Adds every `key = value` line of a rendered config.
    pub fn set_lines(&mut self, text: &str) {
        for line in text.lines() {
            if let Some((k, v)) = line.split_once('=') {
                self.set(k.trim(), v.trim());
            }
        }
    }

    pub fn artifact(&mut self, path: &Path) -> PathBuf {
        self.artifacts.push(path.display().to_string());
        path.to_path_buf()
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
