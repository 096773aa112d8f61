//! Output directory bookkeeping and the run manifest.
//!
//! Every file a run writes goes through [`OutputDir`], which records its
//! SHA-256 digest and size. [`OutputDir::finish`] then writes
//! `manifest.json`. The manifest carries no timestamps, so identical runs
//! produce identical directories.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::{HarnessError, Result};

/// Name of the harness recorded in manifests.
pub const TOOL: &str = "pathwise";

/// One output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Contents of `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub library_version: String,
    pub subcommand: String,
    /// Digest of the canonical JSON of the effective configuration.
    pub config_sha256: String,
    pub seed: u64,
    pub config: Config,
    pub outputs: Vec<OutputRecord>,
}

/// Lowercase hexadecimal SHA-256 digest.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        write!(out, "{b:02x}").expect("writing to a string");
    }
    out
}

/// Writer of the files of one run.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    records: Vec<OutputRecord>,
}

impl OutputDir {
    /// Creates the directory if needed.
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| HarnessError::io(root.display().to_string(), e))?;
        Ok(Self {
            root: root.to_path_buf(),
            records: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `bytes` to `name` and records it.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        std::fs::write(&path, bytes).map_err(|e| HarnessError::io(path.display().to_string(), e))?;
        self.records.push(OutputRecord {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    /// Writes pretty-printed JSON with a trailing newline.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes the manifest of everything recorded so far.
    pub fn finish(mut self, subcommand: &str, config: &Config) -> Result<Manifest> {
        self.records.sort_by(|a, b| a.file.cmp(&b.file));
        let manifest = Manifest {
            tool: TOOL.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            library_version: pathwise::VERSION.to_string(),
            subcommand: subcommand.to_string(),
            config_sha256: sha256_hex(config.canonical_json().as_bytes()),
            seed: config.seed,
            config: config.clone(),
            outputs: self.records,
        };
        let path = self.root.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| HarnessError::io(path.display().to_string(), e))?;
        Ok(manifest)
    }
}
