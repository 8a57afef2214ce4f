//! `manifest.json`: what was run, when, and where the outputs went.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use tomoforge::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// SHA-256 of the canonical JSON form of the effective config.
    pub config_hash: String,
    pub schema_version: u32,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub root_seed: u64,
    /// True when the seed came from the environment rather than the file.
    pub seed_overridden: bool,
    pub threads: usize,
    pub n_trials: usize,
    pub outputs: BTreeMap<String, String>,
    /// Failed trials per method.
    pub failures: BTreeMap<String, usize>,
    /// Smallest k at which every trial of a method is within the convergence
    /// cutoff of its target; null if never.
    pub convergence_k: BTreeMap<String, Option<usize>>,
    pub config: Value,
}

/// Serializes with object keys sorted at every level and no whitespace.
pub fn canonical_json(v: &Value) -> String {
    fn sorted(v: &Value) -> Value {
        match v {
            Value::Object(m) => {
                let b: BTreeMap<&String, Value> = m.iter().map(|(k, v)| (k, sorted(v))).collect();
                Value::Object(b.into_iter().map(|(k, v)| (k.clone(), v)).collect())
            }
            Value::Array(a) => Value::Array(a.iter().map(sorted).collect()),
            other => other.clone(),
        }
    }
    serde_json::to_string(&sorted(v)).expect("JSON value serializes")
}

/// Hash of the parsed config. Defaults are filled in and method names are
/// normalized first, so layout, key order and spelling variants such as
/// `vqt` for `pvqt(1,0)` do not change it.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let v = serde_json::to_value(cfg).expect("config serializes");
    let digest = Sha256::digest(canonical_json(&v).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{"schema_version":1,"n_qubits":1,"n_states":2,"k_values":[2,4],
        "methods":["maxent","vqt_inf"],"root_seed":5}"#;

    fn hash(s: &str) -> String {
        config_hash(&ExperimentConfig::from_json(s).unwrap())
    }

    #[test]
    fn canonical_form_sorts_nested_keys() {
        let v: Value = serde_json::from_str(r#"{"b":{"y":1,"x":[{"d":0,"c":1}]},"a":2}"#).unwrap();
        assert_eq!(canonical_json(&v), r#"{"a":2,"b":{"x":[{"c":1,"d":0}],"y":1}}"#);
    }

    #[test]
    fn hash_ignores_layout_and_spelling() {
        let reordered = r#"{ "root_seed": 5, "methods": ["maxent", "pvqt(0, 1)"],
            "k_values": [2, 4], "n_states": 2, "n_qubits": 1, "schema_version": 1, "rank": 1 }"#;
        assert_eq!(hash(BASE), hash(reordered));
    }

    #[test]
    fn hash_tracks_meaningful_fields() {
        let h = hash(BASE);
        for changed in [
            BASE.replace("\"root_seed\":5", "\"root_seed\":6"),
            BASE.replace("[2,4]", "[2,3]"),
            BASE.replace("\"vqt_inf\"", "\"pvqt(1,0.01)\""),
            BASE.replace("\"n_states\":2", "\"n_states\":3"),
            BASE.replace("}", ",\"noise_level\":0.05}"),
            BASE.replace("}", ",\"tolerances\":{\"sdp_tol\":1e-9}}"),
        ] {
            assert_ne!(hash(&changed), h, "{changed}");
        }
    }
}
