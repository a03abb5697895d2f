//! Rollout collection and the training loop.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::buffer::{RolloutBuffer, Segment};
use super::config::PpoConfig;
use super::policy::{policy_forward, sample_action, PolicyParams};
use super::update::{ppo_update, Adam, UpdateDiagnostics};
use crate::env::AttackEnv;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Minimal episodic interface the trainer needs.
pub trait Environment: Send {
    fn observation_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> Result<Transition>;
}

impl Environment for AttackEnv {
    fn observation_dim(&self) -> usize {
        AttackEnv::observation_dim(self)
    }

    fn action_dim(&self) -> usize {
        AttackEnv::action_dim(self)
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        AttackEnv::reset(self, seed)
    }

    fn step(&mut self, action: &[f64]) -> Result<Transition> {
        let r = AttackEnv::step(self, action)?;
        Ok(Transition {
            observation: r.observation,
            reward: r.reward,
            done: r.done,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    pub reward: f64,
    pub moving_average: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub window: usize,
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn new(window: usize) -> Self {
        LearningCurve {
            window,
            points: Vec::new(),
        }
    }

    pub fn push(&mut self, reward: f64) -> CurvePoint {
        let episode = self.points.len() + 1;
        let start = episode.saturating_sub(self.window);
        let sum: f64 = self.points[start..].iter().map(|p| p.reward).sum::<f64>() + reward;
        let point = CurvePoint {
            episode,
            reward,
            moving_average: sum / (episode - start) as f64,
        };
        self.points.push(point);
        point
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn moving_averages(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.moving_average).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["episode", "reward", &format!("moving_average_{}", self.window)])?;
        for p in &self.points {
            w.write_record([p.episode.to_string(), format!("{:?}", p.reward), format!("{:?}", p.moving_average)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestPolicy {
    pub params: PolicyParams,
    pub moving_average: f64,
    pub episode: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: PolicyParams,
    /// Policy in force when the moving average peaked, once a full window of
    /// episodes exists.
    pub best: Option<BestPolicy>,
    pub curve: LearningCurve,
    pub timesteps: usize,
    pub updates: Vec<UpdateDiagnostics>,
    /// Episodes cut short by a simulation failure.
    pub failed_episodes: usize,
}

impl TrainOutcome {
    pub fn best_or_final(&self) -> &PolicyParams {
        self.best.as_ref().map_or(&self.params, |b| &b.params)
    }
}

struct Worker<E> {
    env: E,
    rng: ChaCha8Rng,
    obs: Vec<f64>,
    episode_reward: f64,
    episodes_started: u64,
    seed_base: u64,
}

impl<E: Environment> Worker<E> {
    fn new(mut env: E, seed: u64, index: usize) -> Self {
        let seed_base = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64 * 1_000_003);
        let obs = env.reset(seed_base);
        Worker {
            env,
            rng: ChaCha8Rng::seed_from_u64(seed_base ^ 0x5DEE_CE66),
            obs,
            episode_reward: 0.0,
            episodes_started: 1,
            seed_base,
        }
    }

    fn collect(&mut self, params: &PolicyParams, n: usize) -> Result<(Segment, Vec<f64>, usize)> {
        let mut seg = Segment::default();
        let mut finished = Vec::new();
        let mut failures = 0;
        for _ in 0..n {
            let out = policy_forward(params, &self.obs)?;
            let (action, lp) = sample_action(&out.mean, &out.log_std, &mut self.rng);
            let (next, reward, done) = match self.env.step(&action) {
                Ok(t) => (t.observation, t.reward, t.done),
                Err(e) if e.is_simulation_failure() => {
                    failures += 1;
                    (self.obs.clone(), 0.0, true)
                }
                Err(e) => return Err(e),
            };
            seg.push(std::mem::take(&mut self.obs), action, lp, reward, out.value, done);
            self.episode_reward += reward;
            if done {
                finished.push(self.episode_reward);
                self.episode_reward = 0.0;
                self.obs = self.env.reset(self.seed_base.wrapping_add(self.episodes_started));
                self.episodes_started += 1;
            } else {
                self.obs = next;
            }
        }
        seg.bootstrap_value = policy_forward(params, &self.obs)?.value;
        Ok((seg, finished, failures))
    }
}

/// Train a fresh policy. `make_env(i)` builds the environment of worker `i`.
pub fn train<E, F>(make_env: F, cfg: &PpoConfig) -> Result<TrainOutcome>
where
    E: Environment,
    F: Fn(usize) -> Result<E>,
{
    train_with_progress(make_env, cfg, |_, _| {})
}

/// As [`train`], calling `progress(timesteps, curve)` after every update.
pub fn train_with_progress<E, F, P>(make_env: F, cfg: &PpoConfig, mut progress: P) -> Result<TrainOutcome>
where
    E: Environment,
    F: Fn(usize) -> Result<E>,
    P: FnMut(usize, &LearningCurve),
{
    cfg.validate()?;
    let probe = make_env(0)?;
    let (obs_dim, act_dim) = (probe.observation_dim(), probe.action_dim());
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = PolicyParams::new(obs_dim, act_dim, &cfg.hidden, cfg.std_head, cfg.log_std_init, &mut init_rng);
    let mut opt = Adam::new(params.n_params(), cfg.learning_rate);
    let mut update_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0xA5A5_A5A5));
    let mut curve = LearningCurve::new(cfg.average_window);
    let mut outcome = TrainOutcome {
        params: params.clone(),
        best: None,
        curve: curve.clone(),
        timesteps: 0,
        updates: Vec::new(),
        failed_episodes: 0,
    };
    if cfg.total_timesteps == 0 {
        return Ok(outcome);
    }

    let mut workers = Vec::with_capacity(cfg.num_envs);
    workers.push(Worker::new(probe, cfg.seed, 0));
    for i in 1..cfg.num_envs {
        workers.push(Worker::new(make_env(i)?, cfg.seed, i));
    }
    for w in &workers {
        if w.env.observation_dim() != obs_dim || w.env.action_dim() != act_dim {
            return Err(Error::Shape {
                what: "worker environment observation".into(),
                expected: obs_dim,
                actual: w.env.observation_dim(),
            });
        }
    }

    let mut timesteps = 0;
    let mut best: Option<BestPolicy> = None;
    while timesteps < cfg.total_timesteps {
        let per_env = cfg.n_steps.min((cfg.total_timesteps - timesteps).div_ceil(cfg.num_envs));
        let results = collect_all(&mut workers, &params, per_env)?;
        let mut buffer = RolloutBuffer::default();
        for (seg, finished, failures) in results {
            timesteps += seg.len();
            outcome.failed_episodes += failures;
            for r in finished {
                let point = curve.push(r);
                if point.episode >= cfg.average_window
                    && best.as_ref().is_none_or(|b| point.moving_average > b.moving_average)
                {
                    best = Some(BestPolicy {
                        params: params.clone(),
                        moving_average: point.moving_average,
                        episode: point.episode,
                    });
                }
            }
            buffer.segments.push(seg);
        }
        let diag = ppo_update(&mut params, &mut opt, &buffer, cfg, &mut update_rng)?;
        outcome.updates.push(diag);
        progress(timesteps, &curve);
    }
    outcome.params = params;
    outcome.best = best;
    outcome.curve = curve;
    outcome.timesteps = timesteps;
    Ok(outcome)
}

type Collected = (Segment, Vec<f64>, usize);

fn collect_all<E: Environment>(workers: &mut [Worker<E>], params: &PolicyParams, n: usize) -> Result<Vec<Collected>> {
    if workers.len() == 1 {
        return Ok(vec![workers[0].collect(params, n)?]);
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = workers
            .iter_mut()
            .map(|w| s.spawn(move || w.collect(params, n)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("rollout worker panicked"))
            .collect()
    })
}

/// Roll out the mean action for one episode; returns the episode reward.
pub fn rollout_deterministic<E: Environment + ?Sized>(env: &mut E, params: &PolicyParams, seed: u64) -> Result<f64> {
    let mut obs = env.reset(seed);
    let mut total = 0.0;
    loop {
        let out = policy_forward(params, &obs)?;
        let t = env.step(&out.mean)?;
        total += t.reward;
        if t.done {
            return Ok(total);
        }
        obs = t.observation;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_average_window() {
        let mut c = LearningCurve::new(2);
        c.push(1.0);
        c.push(3.0);
        c.push(5.0);
        assert_eq!(c.moving_averages(), vec![1.0, 2.0, 4.0]);
    }

    #[test]
    fn curve_csv_header() {
        let mut c = LearningCurve::new(40);
        c.push(0.5);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("episode,reward,moving_average_40\n1,0.5,0.5\n"), "{text}");
    }
}
