use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// `git describe` output captured at build time, prefixed by the crate version.
pub const VERSION: &str = env!("DPDG_VERSION");

/// Identifies the code, configuration and seed behind an output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub config_hash: String,
    pub seed: Option<u64>,
}

impl Provenance {
    /// Hashes the canonical JSON form of `config`.
    pub fn new<C: Serialize>(config: &C, seed: Option<u64>) -> Self {
        let bytes = serde_json::to_vec(config).expect("configs serialize");
        Self {
            version: VERSION.to_string(),
            config_hash: sha256_hex(&bytes),
            seed,
        }
    }

    /// Lines for the `#` header of CSV outputs.
    pub fn preamble(&self) -> Vec<String> {
        let seed = self
            .seed
            .map_or_else(|| "all".to_string(), |s| s.to_string());
        vec![
            format!("version: {}", self.version),
            format!("config_sha256: {}", self.config_hash),
            format!("seed: {seed}"),
        ]
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
