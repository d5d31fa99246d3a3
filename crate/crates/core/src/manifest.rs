//! `manifest.json` written next to every CLI output.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// SHA-256 of the canonical JSON form of the configuration.
    pub config_hash: String,
    pub seed: Option<u64>,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// Parameters of every stage, as used.
    pub parameters: Value,
    pub outputs: Vec<String>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    pub fn start(command: &str, parameters: Value, seed: Option<u64>) -> Self {
        let t = now();
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash: config_hash(&parameters),
            seed,
            started_unix: t,
            finished_unix: t,
            parameters,
            outputs: Vec::new(),
        }
    }

    pub fn finish(&mut self) {
        self.finished_unix = now();
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        crate::io::write_json(dir.as_ref().join("manifest.json"), self)
    }
}

/// Object keys sorted recursively.
pub fn canonicalize(v: &Value) -> Value {
    match v {
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            Value::Object(keys.into_iter().map(|k| (k.clone(), canonicalize(&m[k]))).collect())
        }
        Value::Array(a) => Value::Array(a.iter().map(canonicalize).collect()),
        other => other.clone(),
    }
}

pub fn config_hash(v: &Value) -> String {
    let text = serde_json::to_string(&canonicalize(v)).expect("JSON values always serialize");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of a TOML document; insensitive to key order and formatting.
pub fn config_hash_toml(text: &str) -> Result<String> {
    let v: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    Ok(config_hash(&serde_json::to_value(v)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_field_order() {
        let a = config_hash_toml("seed = 1\nbudgets = [1, 2]\n[slic]\nm = 2\nk = 3\n").unwrap();
        let b = config_hash_toml("budgets = [1, 2]\n\n[slic]\nk = 3\nm = 2\n\n[x]\n").unwrap();
        let c = config_hash_toml("budgets = [1, 2]\nseed = 1\n[slic]\nk = 3\nm = 2\n").unwrap();
        assert_ne!(a, b);
        assert_eq!(a, c);
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::start("synth", serde_json::json!({"b": 1, "a": [2]}), Some(3));
        m.outputs.push("x.png".into());
        m.finish();
        m.write(dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        let back: RunManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }
}
