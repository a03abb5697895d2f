//! Run configuration: PPO settings plus scenario, from a file and `key=value`
//! overrides.
//!
//! A configuration file is TOML. PPO keys sit at the top level and scenario
//! keys under a `[scenario]` table:
//!
//! ```toml
//! total_timesteps = 50000
//! learning_rate = 1e-3
//!
//! [scenario]
//! gamma_trip = 2.0
//! relay.rocof_limit = 0.5
//! ```
//!
//! Overrides use the same paths, e.g. `total_timesteps=50000` or
//! `scenario.relay.rocof_limit=0.5`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use super::CliError;
use crate::env::Scenario;
use crate::model::NetworkCase;
use crate::ppo::PpoConfig;

/// Seed used when none is given on the command line.
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub ppo: PpoConfig,
    pub scenario: Scenario,
}

impl RunConfig {
    /// Start from PPO defaults and `scenario`, then apply the file and the
    /// overrides in that order. Every unknown key is reported at once.
    pub fn resolve(scenario: Scenario, file: Option<&Path>, overrides: &[String], case: &NetworkCase) -> Result<Self, CliError> {
        let mut ppo = Table::try_from(PpoConfig::default()).expect("config serializes");
        let mut scen = Table::try_from(&scenario).expect("scenario serializes");
        let schema_ppo = ppo.clone();
        let schema_scen = scen.clone();
        let mut unknown = Vec::new();

        let mut assign = |path: &str, value: Value, unknown: &mut Vec<String>| {
            let parts: Vec<&str> = path.split('.').collect();
            let (root, schema, rest) = match parts.as_slice() {
                ["scenario", rest @ ..] if !rest.is_empty() => (&mut scen, &schema_scen, rest.to_vec()),
                _ => (&mut ppo, &schema_ppo, parts.clone()),
            };
            if !set_path(root, schema, &rest, value) {
                unknown.push(path.to_string());
            }
        };

        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            let table: Table = text
                .parse()
                .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
            let mut leaves = Vec::new();
            flatten("", &Value::Table(table), &mut leaves);
            for (key, value) in leaves {
                assign(&key, value, &mut unknown);
            }
        }
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("override {item:?} is not of the form key=value")))?;
            assign(key.trim(), parse_value(raw.trim()), &mut unknown);
        }
        if !unknown.is_empty() {
            return Err(CliError::Usage(format!("unknown config key(s): {}", unknown.join(", "))));
        }

        let ppo: PpoConfig = Value::Table(ppo)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Usage(format!("invalid PPO setting: {}", e.message())))?;
        let scenario: Scenario = Value::Table(scen)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Usage(format!("invalid scenario setting: {}", e.message())))?;
        ppo.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        scenario.validate(case).map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(RunConfig { ppo, scenario })
    }

    /// SHA-256 over the canonical JSON form (sorted keys).
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_value(self).expect("config serializes");
        let text = serde_json::to_string(&canonical).expect("json serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_toml(&self) -> String {
        let mut table = Table::try_from(&self.ppo).expect("config serializes");
        table.insert("scenario".into(), Value::Table(Table::try_from(&self.scenario).expect("scenario serializes")));
        toml::to_string(&table).expect("table serializes")
    }
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn flatten(prefix: &str, value: &Value, out: &mut Vec<(String, Value)>) {
    match value {
        Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        _ => out.push((prefix.to_string(), value.clone())),
    }
}

/// Set `path` inside `root` if the same path exists in `schema`.
fn set_path(root: &mut Table, schema: &Table, path: &[&str], value: Value) -> bool {
    match path {
        [] => false,
        [leaf] => {
            if schema.contains_key(*leaf) && !matches!(schema[*leaf], Value::Table(_)) {
                root.insert(leaf.to_string(), value);
                true
            } else {
                false
            }
        }
        [head, rest @ ..] => match (schema.get(*head), root.get_mut(*head)) {
            (Some(Value::Table(s)), Some(Value::Table(r))) => set_path(r, s, rest, value),
            _ => false,
        },
    }
}
