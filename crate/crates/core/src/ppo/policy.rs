//! Diagonal Gaussian actor with a separate critic.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, Tape};
use crate::error::{Error, Result};

/// Lower bound applied to log standard deviations.
pub const LOG_STD_FLOOR: f64 = -20.0;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Where the action log-std comes from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdHead {
    /// A free parameter vector independent of the observation.
    #[default]
    Separate,
    /// The second half of the actor output.
    Network,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub actor: Mlp,
    pub critic: Mlp,
    /// Used only with [`StdHead::Separate`].
    pub log_std: Vec<f64>,
    pub head: StdHead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
    pub value: f64,
}

impl PolicyParams {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        act_dim: usize,
        hidden: &[usize],
        head: StdHead,
        log_std_init: f64,
        rng: &mut R,
    ) -> Self {
        let actor_out = match head {
            StdHead::Separate => act_dim,
            StdHead::Network => 2 * act_dim,
        };
        let sizes = |out: usize| {
            let mut s = vec![obs_dim];
            s.extend_from_slice(hidden);
            s.push(out);
            s
        };
        let gain = std::f64::consts::SQRT_2;
        let mut actor = Mlp::orthogonal(&sizes(actor_out), gain, 0.01, rng);
        let critic = Mlp::orthogonal(&sizes(1), gain, 1.0, rng);
        if head == StdHead::Network {
            // Start the log-std outputs at `log_std_init` through their biases.
            let n = actor.params.len();
            for b in &mut actor.params[n - act_dim..] {
                *b = log_std_init;
            }
        }
        PolicyParams {
            actor,
            critic,
            log_std: match head {
                StdHead::Separate => vec![log_std_init; act_dim],
                StdHead::Network => Vec::new(),
            },
            head,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        match self.head {
            StdHead::Separate => self.actor.output_dim(),
            StdHead::Network => self.actor.output_dim() / 2,
        }
    }

    pub fn n_params(&self) -> usize {
        self.actor.n_params() + self.critic.n_params() + self.log_std.len()
    }

    /// All parameters as one vector: actor, critic, log-std.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.extend_from_slice(&self.actor.params);
        v.extend_from_slice(&self.critic.params);
        v.extend_from_slice(&self.log_std);
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params());
        let (a, rest) = flat.split_at(self.actor.n_params());
        let (c, s) = rest.split_at(self.critic.n_params());
        self.actor.params.copy_from_slice(a);
        self.critic.params.copy_from_slice(c);
        self.log_std.copy_from_slice(s);
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }

    pub fn check_obs(&self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.obs_dim() {
            return Err(Error::Shape {
                what: "policy observation".into(),
                expected: self.obs_dim(),
                actual: obs.len(),
            });
        }
        Ok(())
    }
}

/// Forward pass with the tapes needed for backpropagation.
pub(crate) struct ForwardTapes {
    pub actor: Tape,
    pub critic: Tape,
    pub out: PolicyOutput,
}

pub(crate) fn forward_tapes(p: &PolicyParams, obs: &[f64]) -> Result<ForwardTapes> {
    p.check_obs(obs)?;
    let actor = p.actor.forward_tape(obs)?;
    let critic = p.critic.forward_tape(obs)?;
    let a = actor.output();
    let d = p.act_dim();
    let (mean, log_std) = match p.head {
        StdHead::Separate => (a.to_vec(), p.log_std.iter().map(|s| s.max(LOG_STD_FLOOR)).collect()),
        StdHead::Network => (a[..d].to_vec(), a[d..].iter().map(|s| s.max(LOG_STD_FLOOR)).collect()),
    };
    let value = critic.output()[0];
    Ok(ForwardTapes {
        actor,
        critic,
        out: PolicyOutput { mean, log_std, value },
    })
}

pub fn policy_forward(p: &PolicyParams, obs: &[f64]) -> Result<PolicyOutput> {
    p.check_obs(obs)?;
    let a = p.actor.forward(obs)?;
    let value = p.critic.forward(obs)?[0];
    let d = p.act_dim();
    let (mean, log_std) = match p.head {
        StdHead::Separate => (a, p.log_std.iter().map(|s| s.max(LOG_STD_FLOOR)).collect()),
        StdHead::Network => (a[..d].to_vec(), a[d..].iter().map(|s| s.max(LOG_STD_FLOOR)).collect()),
    };
    Ok(PolicyOutput { mean, log_std, value })
}

/// Sum of per-dimension Gaussian log densities.
pub fn log_prob(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    action
        .iter()
        .zip(mean)
        .zip(log_std)
        .map(|((a, m), s)| {
            let s = s.max(LOG_STD_FLOOR);
            let z = (a - m) / s.exp();
            -0.5 * z * z - s - 0.5 * LN_2PI
        })
        .sum()
}

/// Differential entropy of the diagonal Gaussian.
pub fn entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|s| s.max(LOG_STD_FLOOR) + 0.5 * (LN_2PI + 1.0)).sum()
}

pub fn sample_action<R: Rng + ?Sized>(mean: &[f64], log_std: &[f64], rng: &mut R) -> (Vec<f64>, f64) {
    let action: Vec<f64> = mean
        .iter()
        .zip(log_std)
        .map(|(m, s)| m + s.max(LOG_STD_FLOOR).exp() * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let lp = log_prob(&action, mean, log_std);
    (action, lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_give_zero_mean_and_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = PolicyParams::new(3, 1, &[64, 64], StdHead::Separate, 0.0, &mut rng);
        p.actor.params.fill(0.0);
        p.critic.params.fill(0.0);
        let out = policy_forward(&p, &[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(out.mean, vec![0.0]);
        assert_eq!(out.value, 0.0);
        assert_eq!(out.log_std, vec![0.0]);
    }

    #[test]
    fn density_at_mode() {
        let lp = log_prob(&[0.0, 0.0, 0.0], &[0.0; 3], &[0.0; 3]);
        assert!((lp + 1.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
    }

    #[test]
    fn floored_std_collapses_to_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (a, _) = sample_action(&[0.7, -0.2], &[-50.0, -50.0], &mut rng);
        assert!((a[0] - 0.7).abs() < 1e-7 && (a[1] + 0.2).abs() < 1e-7);
    }

    #[test]
    fn network_head_reads_log_std_from_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = PolicyParams::new(4, 2, &[8], StdHead::Network, -0.5, &mut rng);
        assert_eq!(p.act_dim(), 2);
        assert_eq!(p.actor.output_dim(), 4);
        let out = policy_forward(&p, &[0.0; 4]).unwrap();
        assert_eq!(out.log_std, vec![-0.5, -0.5]);
    }

    #[test]
    fn flat_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = PolicyParams::new(3, 1, &[16, 16], StdHead::Separate, 0.0, &mut rng);
        let mut q = p.clone();
        q.set_flat(&vec![0.0; p.n_params()]);
        q.set_flat(&p.to_flat());
        assert_eq!(p, q);
    }
}
