use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::PpoConfig;
use super::policy::PolicyParams;
use crate::env::Scenario;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    /// Scenario the policy was trained on, with any overrides applied.
    pub scenario: Scenario,
    pub params: PolicyParams,
    pub config: PpoConfig,
    pub timesteps: usize,
}

impl Checkpoint {
    pub fn new(scenario: &Scenario, params: PolicyParams, config: PpoConfig, timesteps: usize) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            scenario: scenario.clone(),
            params,
            config,
            timesteps,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "{}: checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                path.as_ref().display(),
                ck.version
            )));
        }
        if !ck.params.is_finite() {
            return Err(Error::InvalidState(format!("{}: non-finite weights", path.as_ref().display())));
        }
        Ok(ck)
    }

    /// Check the policy fits scenario `target` with the given dimensions.
    pub fn check_dims(&self, target: &str, obs_dim: usize, act_dim: usize) -> Result<()> {
        if self.params.obs_dim() != obs_dim {
            return Err(Error::Shape {
                what: format!(
                    "observation width: scenario {target} vs checkpoint trained on {}",
                    self.scenario.name
                ),
                expected: obs_dim,
                actual: self.params.obs_dim(),
            });
        }
        if self.params.act_dim() != act_dim {
            return Err(Error::Shape {
                what: format!("action width: scenario {target} vs checkpoint trained on {}", self.scenario.name),
                expected: act_dim,
                actual: self.params.act_dim(),
            });
        }
        Ok(())
    }
}
