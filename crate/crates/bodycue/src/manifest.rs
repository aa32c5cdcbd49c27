//! Run manifests: `manifest.json` in every output directory.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::formats;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Versions {
    pub bodycue: String,
    pub bodycue_core: String,
    pub format: u32,
}

impl Versions {
    pub fn current() -> Self {
        Self {
            bodycue: env!("CARGO_PKG_VERSION").to_string(),
            bodycue_core: bodycue_core::VERSION.to_string(),
            format: FORMAT_VERSION,
        }
    }
}

/// `path` is prefixed with its origin: `corpus:`, `model:`, `motion_model:`
/// or `script:` for inputs, nothing for outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub versions: Versions,
    pub config: RunConfig,
    pub config_hash: String,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = reader.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn hash_entry(label: String, path: &Path) -> Result<FileHash> {
    Ok(FileHash {
        path: label,
        sha256: sha256_file(path)?,
    })
}

impl Manifest {
    pub fn write(&self, out: &Path) -> Result<()> {
        formats::write_json(&out.join(MANIFEST_FILE), self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        formats::read_json(path)
    }
}
