//! Clipped-surrogate loss, its gradient, and the minibatch update loop.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::buffer::{compute_gae, RolloutBuffer};
use super::config::PpoConfig;
use super::policy::{forward_tapes, log_prob, PolicyParams, StdHead, LOG_STD_FLOOR};
use crate::error::{Error, Result};

/// Samples of one minibatch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.advantages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.advantages.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub total: f64,
    /// Fraction of samples whose ratio left the clip interval.
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateDiagnostics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    /// Gradient norm before clipping, averaged over minibatches.
    pub grad_norm: f64,
    pub minibatches: usize,
}

/// Loss of a minibatch and its gradient with respect to
/// [`PolicyParams::to_flat`].
pub fn loss_and_grad(p: &PolicyParams, batch: &Batch, cfg: &PpoConfig) -> Result<(LossTerms, Vec<f64>)> {
    let n = batch.len();
    if n == 0 {
        return Err(Error::Contract("empty minibatch".into()));
    }
    let inv_n = 1.0 / n as f64;
    let (na, nc) = (p.actor.n_params(), p.critic.n_params());
    let mut grad = vec![0.0; p.n_params()];
    let mut terms = LossTerms::default();
    let d = p.act_dim();

    for i in 0..n {
        let f = forward_tapes(p, &batch.observations[i])?;
        let out = &f.out;
        let act = &batch.actions[i];
        let lp = log_prob(act, &out.mean, &out.log_std);
        let log_ratio = lp - batch.old_log_probs[i];
        let ratio = log_ratio.exp();
        let adv = batch.advantages[i];
        let clipped = ratio.clamp(1.0 - cfg.clip_range, 1.0 + cfg.clip_range);
        let unclipped_obj = ratio * adv;
        let clipped_obj = clipped * adv;
        let surrogate = unclipped_obj.min(clipped_obj);
        terms.policy -= surrogate * inv_n;
        if (ratio - 1.0).abs() > cfg.clip_range {
            terms.clip_fraction += inv_n;
        }
        terms.approx_kl += ((ratio - 1.0) - log_ratio) * inv_n;

        // d(-surrogate)/d(logp); zero when the clipped branch is the minimum
        // and the ratio sits outside the clip interval.
        let d_logp = if unclipped_obj <= clipped_obj { -adv * ratio * inv_n } else { 0.0 };

        let ent: f64 = out.log_std.iter().map(|s| s + 0.5 * (1.837_877_066_409_345_3 + 1.0)).sum();
        terms.entropy += ent * inv_n;

        let mut d_actor = vec![0.0; p.actor.output_dim()];
        let mut d_log_std = vec![0.0; d];
        for j in 0..d {
            let s = out.log_std[j];
            let var = (2.0 * s).exp();
            let diff = act[j] - out.mean[j];
            d_actor[j] = d_logp * diff / var;
            d_log_std[j] = d_logp * (diff * diff / var - 1.0) - cfg.ent_coef * inv_n;
        }
        let raw_log_std: Vec<f64> = match p.head {
            StdHead::Separate => p.log_std.clone(),
            StdHead::Network => f.actor.output()[d..].to_vec(),
        };
        for j in 0..d {
            if raw_log_std[j] < LOG_STD_FLOOR {
                d_log_std[j] = 0.0;
            }
        }
        match p.head {
            StdHead::Separate => {
                for j in 0..d {
                    grad[na + nc + j] += d_log_std[j];
                }
            }
            StdHead::Network => d_actor[d..].copy_from_slice(&d_log_std),
        }
        p.actor.backward(&f.actor, &d_actor, &mut grad[..na]);

        let err = out.value - batch.returns[i];
        terms.value += err * err * inv_n;
        let d_value = cfg.vf_coef * 2.0 * err * inv_n;
        p.critic.backward(&f.critic, &[d_value], &mut grad[na..na + nc]);
    }
    terms.total = terms.policy + cfg.vf_coef * terms.value - cfg.ent_coef * terms.entropy;
    if !terms.total.is_finite() {
        return Err(Error::NonFiniteLoss(format!(
            "policy {} value {} entropy {}",
            terms.policy, terms.value, terms.entropy
        )));
    }
    Ok((terms, grad))
}

/// Scale `grad` so its Euclidean norm is at most `max_norm`; returns the
/// norm before scaling.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / (norm + 1e-12);
        for g in grad.iter_mut() {
            *g *= scale;
        }
    }
    norm
}

/// Adaptive moment estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Normalize to zero mean and unit standard deviation.
pub fn normalize(values: &mut [f64]) {
    let n = values.len() as f64;
    if values.len() < 2 {
        return;
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    for v in values.iter_mut() {
        *v = (*v - mean) / (std + 1e-8);
    }
}

/// Several epochs of minibatch optimization over one rollout. On a
/// non-finite loss the parameters are left as they were before the update.
pub fn ppo_update<R: Rng + ?Sized>(
    params: &mut PolicyParams,
    opt: &mut Adam,
    buffer: &RolloutBuffer,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateDiagnostics> {
    let (mut advantages, returns) = compute_gae(buffer, cfg.gamma, cfg.gae_lambda)?;
    if cfg.normalize_advantage {
        normalize(&mut advantages);
    }
    let mut obs = Vec::with_capacity(buffer.len());
    let mut acts = Vec::with_capacity(buffer.len());
    let mut old_lp = Vec::with_capacity(buffer.len());
    for seg in &buffer.segments {
        obs.extend(seg.observations.iter().cloned());
        acts.extend(seg.actions.iter().cloned());
        old_lp.extend_from_slice(&seg.log_probs);
    }
    let n = obs.len();
    let mut order: Vec<usize> = (0..n).collect();
    let backup = (params.clone(), opt.clone());
    let mut flat = params.to_flat();
    let mut diag = UpdateDiagnostics::default();
    let mbs = cfg.batch_size.max(1);

    for _ in 0..cfg.n_epochs {
        order.shuffle(rng);
        for chunk in order.chunks(mbs) {
            let batch = Batch {
                observations: chunk.iter().map(|&i| obs[i].clone()).collect(),
                actions: chunk.iter().map(|&i| acts[i].clone()).collect(),
                old_log_probs: chunk.iter().map(|&i| old_lp[i]).collect(),
                advantages: chunk.iter().map(|&i| advantages[i]).collect(),
                returns: chunk.iter().map(|&i| returns[i]).collect(),
            };
            let (terms, mut grad) = match loss_and_grad(params, &batch, cfg) {
                Ok(v) => v,
                Err(e) => {
                    *params = backup.0;
                    *opt = backup.1;
                    return Err(e);
                }
            };
            let norm = clip_grad_norm(&mut grad, cfg.max_grad_norm);
            if !norm.is_finite() {
                *params = backup.0;
                *opt = backup.1;
                return Err(Error::NonFiniteLoss(format!("gradient norm {norm}")));
            }
            opt.step(&mut flat, &grad);
            params.set_flat(&flat);
            diag.policy_loss += terms.policy;
            diag.value_loss += terms.value;
            diag.entropy += terms.entropy;
            diag.clip_fraction += terms.clip_fraction;
            diag.approx_kl += terms.approx_kl;
            diag.grad_norm += norm;
            diag.minibatches += 1;
        }
    }
    if diag.minibatches > 0 {
        let k = diag.minibatches as f64;
        diag.policy_loss /= k;
        diag.value_loss /= k;
        diag.entropy /= k;
        diag.clip_fraction /= k;
        diag.approx_kl /= k;
        diag.grad_norm /= k;
    }
    Ok(diag)
}
