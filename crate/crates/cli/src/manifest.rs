use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";
pub const PRNG: &str = "ChaCha8 (rand_chacha 0.3), seeded from the u64 seed";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub prng: String,
    pub wall_time_s: f64,
    pub outputs: Vec<OutputRecord>,
    pub results: Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn record(file: &str, bytes: &[u8]) -> OutputRecord {
    OutputRecord { file: file.to_owned(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 }
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    pub fn dir(path: &Path) -> PathBuf {
        path.parent().map(Path::to_path_buf).unwrap_or_default()
    }
}

/// Files whose current checksum differs from the manifest, with a reason.
pub fn check_outputs(manifest: &Manifest, dir: &Path) -> Vec<(String, String)> {
    let mut bad = Vec::new();
    for out in &manifest.outputs {
        match fs::read(dir.join(&out.file)) {
            Ok(bytes) if sha256_hex(&bytes) == out.sha256 => {}
            Ok(_) => bad.push((out.file.clone(), "checksum mismatch".to_owned())),
            Err(e) => bad.push((out.file.clone(), format!("unreadable: {e}"))),
        }
    }
    bad
}
