//! Run manifest: the resolved configuration plus digests of every input
//! file, enough to repeat a scripted run byte for byte.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const SCHEMA: &str = "manifest.v1";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub schema: String,
    pub tool: String,
    pub command: String,
    pub engine: Option<String>,
    pub inputs: Vec<InputDigest>,
    pub config: RunConfig,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig, engine: Option<String>) -> Self {
        Self {
            schema: SCHEMA.into(),
            tool: concat!("probe ", env!("CARGO_PKG_VERSION")).into(),
            command: command.into(),
            engine,
            inputs: Vec::new(),
            config: config.clone(),
        }
    }

    /// Records `path` (as written in the config) with its content digest.
    pub fn add_input(
        &mut self,
        role: &str,
        as_written: &Path,
        resolved: &Path,
    ) -> std::io::Result<()> {
        self.inputs.push(InputDigest {
            role: role.into(),
            path: as_written.display().to_string(),
            sha256: sha256_file(resolved)?,
        });
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}
