//! Run manifests: what was run, with which configuration, and the digest of
//! every file it wrote.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ConfigFile;
use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub command: String,
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub started: String,
    pub finished: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run: RunInfo,
    pub files: Vec<FileRecord>,
    pub config: ConfigFile,
}

pub fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let bytes = std::fs::read(path).map_err(|e| Error::File {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    /// Digest `names` (relative to `dir`) and record them in order.
    pub fn new(command: &str, config: &ConfigFile, dir: &Path, names: &[String], started: String) -> Result<Self> {
        let files = names
            .iter()
            .map(|name| {
                let (sha256, bytes) = sha256_file(&dir.join(name))?;
                Ok(FileRecord {
                    name: name.clone(),
                    sha256,
                    bytes,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            run: RunInfo {
                command: command.to_string(),
                tool: env!("CARGO_PKG_NAME").to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                seed: config.experiment.seed,
                started,
                finished: now_rfc3339(),
            },
            files,
            config: config.clone(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        crate::io::write_text(&dir.join(MANIFEST_NAME), &self.to_toml())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::File {
            path: path.to_path_buf(),
            source: e,
        })?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Names of listed files whose current digest differs (or which are missing).
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter(|f| sha256_file(&dir.join(&f.name)).map(|(d, _)| d != f.sha256).unwrap_or(true))
            .map(|f| f.name.clone())
            .collect()
    }
}
