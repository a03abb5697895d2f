use serde::{Deserialize, Serialize};

use super::policy::StdHead;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub learning_rate: f64,
    /// Minibatch size.
    pub batch_size: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub ent_coef: f64,
    pub vf_coef: f64,
    pub max_grad_norm: f64,
    pub clip_range: f64,
    /// Transitions collected per environment between updates.
    pub n_steps: usize,
    pub n_epochs: usize,
    pub normalize_advantage: bool,
    pub hidden: Vec<usize>,
    pub log_std_init: f64,
    pub std_head: StdHead,
    /// Total environment transitions before training stops.
    pub total_timesteps: usize,
    pub num_envs: usize,
    /// Window of the episode-reward moving average.
    pub average_window: usize,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            learning_rate: 3e-4,
            batch_size: 64,
            gamma: 0.99,
            gae_lambda: 0.95,
            ent_coef: 0.0,
            vf_coef: 0.5,
            max_grad_norm: 0.5,
            clip_range: 0.2,
            n_steps: 2048,
            n_epochs: 10,
            normalize_advantage: true,
            hidden: vec![64, 64],
            log_std_init: 0.0,
            std_head: StdHead::Separate,
            total_timesteps: 100_000,
            num_envs: 1,
            average_window: 40,
            seed: 0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        let coefs = [
            self.learning_rate,
            self.gamma,
            self.gae_lambda,
            self.ent_coef,
            self.vf_coef,
            self.max_grad_norm,
            self.clip_range,
            self.log_std_init,
        ];
        if !coefs.iter().all(|c| c.is_finite()) {
            return bad("all coefficients must be finite");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.max_grad_norm > 0.0 && self.clip_range > 0.0) {
            return bad("learning_rate, max_grad_norm and clip_range must be positive");
        }
        if self.ent_coef < 0.0 || self.vf_coef < 0.0 {
            return bad("loss coefficients must be non-negative");
        }
        if self.batch_size == 0 || self.n_steps == 0 || self.n_epochs == 0 || self.num_envs == 0 || self.average_window == 0 {
            return bad("batch_size, n_steps, n_epochs, num_envs and average_window must be positive");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer widths must be positive");
        }
        Ok(())
    }
}
