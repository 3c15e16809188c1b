use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::atomic::write_text;
use crate::error::{Error, Result};
use crate::pipeline::PipelineConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to rerun a command: the full config, its seeds and
/// the hashes of the files it read and wrote.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    /// `key=value` snapshot, loadable as a config file.
    pub config_text: String,
    pub config: PipelineConfig,
    pub seed: u64,
    pub vo_seed: u64,
    pub parallel: bool,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    /// Free-form facts about the run, e.g. the PSF bank fingerprint.
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>, config: &PipelineConfig) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            args,
            config_text: config.to_config_text(),
            config: config.clone(),
            seed: config.seed,
            vo_seed: config.vo.seed,
            parallel: crate::par::is_parallel(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            notes: BTreeMap::new(),
        }
    }

    pub fn add_inputs<'a>(&mut self, paths: impl IntoIterator<Item = &'a Path>) -> Result<()> {
        for p in paths {
            self.inputs.push(hash_entry(p)?);
        }
        Ok(())
    }

    pub fn add_outputs<'a>(&mut self, paths: impl IntoIterator<Item = &'a Path>) -> Result<()> {
        for p in paths {
            self.outputs.push(hash_entry(p)?);
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_text(&path, &(json + "\n"))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = super::atomic::read_text(path)?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

fn hash_entry(path: &Path) -> Result<FileHash> {
    Ok(FileHash {
        path: path.to_path_buf(),
        sha256: hash_file(path)?,
    })
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_file(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hash_bytes(&bytes))
}
