//! Run manifests: every command drops one next to its outputs with the
//! resolved configuration, input hashes, and seed, so a run can be
//! reproduced in replay mode.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub artifact_version: String,
    pub seed: u64,
    pub timestamp: String,
    pub config: serde_json::Value,
    pub input_hashes: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(seed: u64, config: serde_json::Value) -> Self {
        let command = std::env::args().collect::<Vec<_>>().join(" ");
        Self {
            command,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            timestamp: chrono::Utc::now().to_rfc3339(),
            config,
            input_hashes: BTreeMap::new(),
        }
    }

    /// Record the sha256 of each existing input file.
    pub fn hash_inputs<'a>(&mut self, paths: impl IntoIterator<Item = Option<&'a PathBuf>>) {
        for path in paths.into_iter().flatten() {
            if let Ok(bytes) = std::fs::read(path) {
                let digest = Sha256::digest(&bytes);
                self.input_hashes
                    .insert(path.display().to_string(), hex_string(&digest));
            }
        }
    }

    pub fn write(&self, out_dir: &Path) -> anyhow::Result<()> {
        let path = out_dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
