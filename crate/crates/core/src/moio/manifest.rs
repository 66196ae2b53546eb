use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{Config, Source};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub value: String,
    pub source: Source,
}

/// Record of one run: the fully resolved configuration and input digests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: BTreeMap<String, ManifestEntry>,
    pub inputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: impl Into<String>, config: &Config) -> Self {
        Manifest {
            tool: "trackkit".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: config
                .entries()
                .map(|(k, v, source)| {
                    (
                        k.to_string(),
                        ManifestEntry {
                            value: v.to_string(),
                            source,
                        },
                    )
                })
                .collect(),
            inputs: BTreeMap::new(),
        }
    }

    pub fn add_input(&mut self, name: impl Into<String>, bytes: &[u8]) {
        self.inputs.insert(name.into(), sha256_hex(bytes));
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}
