use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Everything needed to rerun a command. Wall-clock times are kept out so
/// that identical invocations produce identical bytes.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    pub version: &'static str,
    pub input_checksums: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, params: serde_json::Value, seed: Option<u64>) -> Self {
        RunManifest {
            schema_version: SCHEMA_VERSION,
            command: command.to_owned(),
            params,
            seed,
            version: env!("CARGO_PKG_VERSION"),
            input_checksums: BTreeMap::new(),
        }
    }

    pub fn with_input(mut self, path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let digest = Sha256::digest(&bytes);
        self.input_checksums
            .insert(path.display().to_string(), format!("sha256:{}", hex::encode(digest)));
        Ok(self)
    }
}
