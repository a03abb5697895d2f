use crate::error::{Error, Result};

/// One time-ordered stretch of transitions from a single environment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Segment {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    /// True when the episode ended with this transition.
    pub dones: Vec<bool>,
    /// Value of the observation following the last transition; ignored when
    /// the last transition is terminal.
    pub bootstrap_value: f64,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn push(&mut self, obs: Vec<f64>, action: Vec<f64>, log_prob: f64, reward: f64, value: f64, done: bool) {
        self.observations.push(obs);
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.dones.push(done);
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub segments: Vec<Segment>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.segments.iter().map(Segment::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&mut self) {
        self.segments.clear();
    }
}

/// Generalized advantage estimates and value targets for every transition,
/// concatenated in segment order.
pub fn compute_gae(buffer: &RolloutBuffer, gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if buffer.is_empty() {
        return Err(Error::Contract("advantage estimation on an empty buffer".into()));
    }
    let mut advantages = Vec::with_capacity(buffer.len());
    let mut returns = Vec::with_capacity(buffer.len());
    for seg in &buffer.segments {
        let n = seg.len();
        let mut adv = vec![0.0; n];
        let mut next_adv = 0.0;
        for t in (0..n).rev() {
            let not_done = if seg.dones[t] { 0.0 } else { 1.0 };
            let next_value = if t + 1 < n { seg.values[t + 1] } else { seg.bootstrap_value };
            let delta = seg.rewards[t] + gamma * next_value * not_done - seg.values[t];
            next_adv = delta + gamma * lambda * not_done * next_adv;
            adv[t] = next_adv;
        }
        returns.extend(adv.iter().zip(&seg.values).map(|(a, v)| a + v));
        advantages.extend(adv);
    }
    Ok((advantages, returns))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn segment(rewards: &[f64], values: &[f64], dones: &[bool], bootstrap: f64) -> RolloutBuffer {
        let mut s = Segment::default();
        for i in 0..rewards.len() {
            s.push(vec![0.0], vec![0.0], 0.0, rewards[i], values[i], dones[i]);
        }
        s.bootstrap_value = bootstrap;
        RolloutBuffer { segments: vec![s] }
    }

    #[test]
    fn hand_recursion_two_steps() {
        let b = segment(&[1.0, 1.0], &[0.0, 0.0], &[false, true], 0.0);
        let (a, r) = compute_gae(&b, 0.99, 0.95).unwrap();
        assert!((a[1] - 1.0).abs() < 1e-12);
        assert!((a[0] - 1.9405).abs() < 1e-12);
        assert_eq!(a, r);
    }

    #[test]
    fn lambda_zero_is_td_error() {
        let b = segment(&[0.5, -1.0, 2.0], &[0.1, 0.4, -0.3], &[false, false, false], 0.7);
        let (a, _) = compute_gae(&b, 0.9, 0.0).unwrap();
        let td = [0.5 + 0.9 * 0.4 - 0.1, -1.0 + 0.9 * -0.3 - 0.4, 2.0 + 0.9 * 0.7 + 0.3];
        for i in 0..3 {
            assert_eq!(a[i], td[i]);
        }
    }

    #[test]
    fn zero_everything() {
        let b = segment(&[0.0; 4], &[0.0; 4], &[false, false, true, false], 0.0);
        let (a, _) = compute_gae(&b, 0.99, 0.95).unwrap();
        assert!(a.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn empty_is_contract_error() {
        assert!(matches!(compute_gae(&RolloutBuffer::default(), 0.99, 0.95), Err(Error::Contract(_))));
    }
}
