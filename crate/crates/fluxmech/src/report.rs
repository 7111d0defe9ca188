//! Command reports: inputs echo, results, provenance. Identical config and
//! seed reproduce a report byte for byte (no timestamps, sorted JSON keys).

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub tool_version: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub inputs: Value,
    pub results: Value,
    pub artifacts: Vec<String>,
    pub provenance: Provenance,
}

impl Report {
    pub fn new(
        command: &str,
        config: &RunConfig,
        seed: u64,
        inputs: Value,
        results: Value,
        artifacts: Vec<String>,
    ) -> Self {
        Self {
            command: command.to_string(),
            inputs,
            results,
            artifacts,
            provenance: Provenance {
                config_sha256: sha256_hex(&config.canonical_json()),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                seed,
            },
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn sha256_hex(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reports_are_reproducible() {
        let cfg = RunConfig::default();
        let make = || {
            Report::new(
                "budget",
                &cfg,
                7,
                serde_json::json!({"n_r": 0.05}),
                serde_json::json!({"eta_d": 4.4e-5}),
                vec!["budget.json".into()],
            )
            .to_json_pretty()
        };
        assert_eq!(make(), make());
    }

    #[test]
    fn hash_tracks_config_changes() {
        let a = sha256_hex(&RunConfig::default().canonical_json());
        let mut cfg = RunConfig::default();
        cfg.trap.current_a = 2.0;
        let b = sha256_hex(&cfg.canonical_json());
        assert_ne!(a, b);
        assert_eq!(a.len(), 64);
    }
}
