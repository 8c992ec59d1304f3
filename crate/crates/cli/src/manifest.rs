use std::path::Path;

use alarm_pipeline::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    /// SHA-256 over the command name, the config fields the command reads and
    /// the input file digests.
    pub config_hash: String,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub config: serde_json::Value,
}

pub fn digest_file(path: &Path) -> Result<InputDigest> {
    let bytes = std::fs::read(path)?;
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

impl Manifest {
    pub fn new(
        command: &str,
        cfg: &RunConfig,
        inputs: Vec<InputDigest>,
        outputs: Vec<String>,
    ) -> Self {
        let config = cfg.semantic_json(command);
        let mut hasher = Sha256::new();
        hasher.update(command.as_bytes());
        hasher.update([0]);
        hasher.update(serde_json::to_vec(&config).expect("json value serializes"));
        for input in &inputs {
            hasher.update([0]);
            hasher.update(input.sha256.as_bytes());
        }
        Self {
            command: command.to_owned(),
            seed: cfg.seed,
            config_hash: hex::encode(hasher.finalize()),
            inputs,
            outputs,
            config,
        }
    }
}
