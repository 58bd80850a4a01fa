use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{decide, PolicyHead, RlAgent};
use crate::agents::{ActMode, AgentError};
use crate::config::{ConfigError, Section};
use crate::neural::{entropy, log_softmax, softmax, Sgd};
use crate::rng::stream;
use crate::task::{
    env_step, sample_goal, EnvAgent, EpisodeLog, EpisodeState, Goal, GoalType, Scenario, TaskError,
};

#[derive(Debug, Error)]
pub enum RlError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("trajectory has no terminal step")]
    UnterminatedTrajectory,
    #[error("no source log has a {0} goal")]
    NoEpisodes(GoalType),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct A2CConfig {
    pub learning_rate: f64,
    pub gamma: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub clip_norm: f64,
    pub batch_episodes: usize,
    pub max_updates: usize,
    pub horizon: usize,
    pub goal_type: GoalType,
}

impl Default for A2CConfig {
    fn default() -> Self {
        A2CConfig {
            learning_rate: 0.3,
            gamma: 0.99,
            value_coef: 0.5,
            entropy_coef: 0.01,
            clip_norm: 1.0,
            batch_episodes: 64,
            max_updates: 2000,
            horizon: 1,
            goal_type: GoalType::GameAct,
        }
    }
}

const A2C_KEYS: &[&str] = &[
    "learning_rate", "gamma", "value_coef", "entropy_coef", "clip_norm", "batch_episodes",
    "max_updates", "horizon", "goal_type",
];

impl A2CConfig {
    /// Defaults with the batch size tied to the horizon: 64 for one step,
    /// 32 otherwise.
    pub fn for_horizon(horizon: usize) -> Self {
        A2CConfig { horizon, batch_episodes: if horizon <= 1 { 64 } else { 32 }, ..A2CConfig::default() }
    }

    pub fn from_section(s: &Section, base: A2CConfig) -> Result<Self, ConfigError> {
        s.only(A2C_KEYS, &[])?;
        let mut c = base;
        s.read("horizon", &mut c.horizon)?;
        if s.raw("batch_episodes").is_none() && s.raw("horizon").is_some() {
            c.batch_episodes = A2CConfig::for_horizon(c.horizon).batch_episodes;
        }
        s.read("learning_rate", &mut c.learning_rate)?;
        s.read("gamma", &mut c.gamma)?;
        s.read("value_coef", &mut c.value_coef)?;
        s.read("entropy_coef", &mut c.entropy_coef)?;
        s.read("clip_norm", &mut c.clip_norm)?;
        s.read("batch_episodes", &mut c.batch_episodes)?;
        s.read("max_updates", &mut c.max_updates)?;
        s.read("goal_type", &mut c.goal_type)?;
        if !(c.learning_rate > 0.0) {
            return Err(s.invalid("learning_rate", c.learning_rate, "must be positive"));
        }
        if !(c.gamma > 0.0 && c.gamma <= 1.0) {
            return Err(s.invalid("gamma", c.gamma, "must lie in (0, 1]"));
        }
        if c.value_coef < 0.0 || c.entropy_coef < 0.0 {
            return Err(s.invalid("entropy_coef", c.entropy_coef, "coefficients must be non-negative"));
        }
        if c.batch_episodes == 0 {
            return Err(s.invalid("batch_episodes", c.batch_episodes, "must be at least 1"));
        }
        if c.horizon == 0 {
            return Err(s.invalid("horizon", c.horizon, "must be at least 1"));
        }
        Ok(c)
    }

    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("learning_rate", self.learning_rate.to_string()),
            ("gamma", self.gamma.to_string()),
            ("value_coef", self.value_coef.to_string()),
            ("entropy_coef", self.entropy_coef.to_string()),
            ("clip_norm", self.clip_norm.to_string()),
            ("batch_episodes", self.batch_episodes.to_string()),
            ("max_updates", self.max_updates.to_string()),
            ("horizon", self.horizon.to_string()),
            ("goal_type", self.goal_type.to_string()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep<I> {
    pub input: I,
    pub action: usize,
    pub logprob: f64,
    pub value: f64,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<I> {
    pub steps: Vec<TrajectoryStep<I>>,
    pub log: EpisodeLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub update: usize,
    pub mean_reward: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub grad_norm: f64,
    pub wall_clock_s: f64,
}

/// Episode starts drawn from source logs: a uniformly chosen eligible log
/// and a uniformly chosen goal among its env actions.
#[derive(Debug, Clone)]
pub struct EpisodeSampler {
    pub logs: Vec<EpisodeLog>,
    pub goal_type: GoalType,
}

impl EpisodeSampler {
    pub fn new(logs: impl IntoIterator<Item = EpisodeLog>, goal_type: GoalType) -> Result<Self, RlError> {
        let logs: Vec<EpisodeLog> = logs
            .into_iter()
            .filter(|l| l.env_actions().any(|a| GoalType::of(a) == goal_type))
            .collect();
        if logs.is_empty() {
            return Err(RlError::NoEpisodes(goal_type));
        }
        Ok(EpisodeSampler { logs, goal_type })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(String, Scenario, Goal), RlError> {
        let log = &self.logs[rng.gen_range(0..self.logs.len())];
        let (s, g) = sample_goal(log, self.goal_type, rng)?;
        Ok((log.id.clone(), s, g))
    }
}

fn rollout<A: RlAgent, R: Rng>(
    agent: &A,
    env: &dyn EnvAgent,
    id: String,
    scenario: Scenario,
    goal: Goal,
    horizon: usize,
    rng: &mut R,
) -> Result<Trajectory<<A::Head as PolicyHead>::Input>, RlError> {
    let mut state = EpisodeState::new(scenario, goal, horizon);
    let mut steps = Vec::new();
    while !state.done {
        let obs = agent.observe(&state.player_context());
        let d = decide(agent, &obs, ActMode::Sample, rng)?;
        let (next, _, reward, done) = env_step(&state, &d.utterance, env, rng)?;
        state = next;
        steps.push(TrajectoryStep {
            input: d.input,
            action: d.action,
            logprob: d.logprob,
            value: d.value,
            reward: if done { reward as f64 } else { 0.0 },
            done,
        });
    }
    let world_id = id.split('-').next().unwrap_or("").to_string();
    Ok(Trajectory { steps, log: state.into_log(id, world_id) })
}

/// `cfg.batch_episodes` sampled rollouts. Episode `e` of update `u` uses its
/// own stream derived from `(seed, u, e)`.
pub fn collect_batch<A: RlAgent>(
    agent: &A,
    env: &dyn EnvAgent,
    sampler: &EpisodeSampler,
    cfg: &A2CConfig,
    seed: u64,
    update: usize,
) -> Result<Vec<Trajectory<<A::Head as PolicyHead>::Input>>, RlError> {
    (0..cfg.batch_episodes)
        .into_par_iter()
        .map(|e| {
            let mut rng = stream(seed, &[update as u64, e as u64]);
            let (id, scenario, goal) = sampler.sample(&mut rng)?;
            rollout(agent, env, id, scenario, goal, cfg.horizon, &mut rng)
        })
        .collect()
}

/// `(return_t, advantage_t)` with `return_t = γ^(T−t)·r_T`.
pub fn compute_returns_advantages<I>(steps: &[TrajectoryStep<I>], gamma: f64) -> Result<Vec<(f64, f64)>, RlError> {
    let last = steps.last().ok_or(RlError::UnterminatedTrajectory)?;
    if !last.done {
        return Err(RlError::UnterminatedTrajectory);
    }
    let t_end = steps.len() - 1;
    Ok(steps
        .iter()
        .enumerate()
        .map(|(t, s)| {
            let ret = gamma.powi((t_end - t) as i32) * last.reward;
            (ret, ret - s.value)
        })
        .collect())
}

/// Flattened per-step training targets.
pub struct A2CSample<I> {
    pub input: I,
    pub action: usize,
    pub ret: f64,
    pub advantage: f64,
}

pub struct A2CLoss {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
}

/// `−mean(logπ(a)·adv) + c_v·mean((v − R)²) − c_e·mean(H(π))`, with the
/// advantage held fixed, and its gradient with respect to the head.
pub fn a2c_loss_and_grad<H: PolicyHead>(
    head: &H,
    samples: &[A2CSample<H::Input>],
    cfg: &A2CConfig,
) -> Result<(A2CLoss, H::Grad), RlError> {
    if samples.is_empty() {
        return Err(RlError::EmptyBatch);
    }
    let inv_n = 1.0 / samples.len() as f64;
    let mut grad = head.zero_grad();
    let mut loss = A2CLoss { total: 0.0, policy: 0.0, value: 0.0, entropy: 0.0 };
    for s in samples {
        let z = head.logits(&s.input);
        let p = softmax(&z);
        let logp = log_softmax(&z);
        let h = entropy(&p);
        let v = head.value(&s.input);
        loss.policy -= logp[s.action] * s.advantage * inv_n;
        loss.value += (v - s.ret) * (v - s.ret) * inv_n;
        loss.entropy += h * inv_n;
        let d_z: Vec<f64> = p
            .iter()
            .zip(&logp)
            .enumerate()
            .map(|(j, (&pj, &lj))| {
                let onehot = if j == s.action { 1.0 } else { 0.0 };
                let pg = s.advantage * (pj - onehot);
                let ent = if pj > 0.0 { cfg.entropy_coef * pj * (lj + h) } else { 0.0 };
                (pg + ent) * inv_n
            })
            .collect();
        let d_v = 2.0 * cfg.value_coef * (v - s.ret) * inv_n;
        head.accumulate(&s.input, &d_z, d_v, &mut grad);
    }
    loss.total = loss.policy + cfg.value_coef * loss.value - cfg.entropy_coef * loss.entropy;
    Ok((loss, grad))
}

/// One clipped SGD step on the head from a batch of finished rollouts.
pub fn a2c_update<A: RlAgent>(
    agent: &mut A,
    batch: &[Trajectory<<A::Head as PolicyHead>::Input>],
    cfg: &A2CConfig,
    update: usize,
) -> Result<TrainStats, RlError> {
    if batch.is_empty() {
        return Err(RlError::EmptyBatch);
    }
    let start = Instant::now();
    let mut samples = Vec::new();
    let mut reward = 0.0;
    for traj in batch {
        reward += traj.log.reward as f64;
        for (s, (ret, adv)) in traj.steps.iter().zip(compute_returns_advantages(&traj.steps, cfg.gamma)?) {
            samples.push(A2CSample { input: s.input.clone(), action: s.action, ret, advantage: adv });
        }
    }
    let (loss, grad) = a2c_loss_and_grad(agent.head(), &samples, cfg)?;
    let norm_sq = A::Head::grad_norm_sq(&grad);
    let sgd = Sgd { learning_rate: cfg.learning_rate, clip_norm: cfg.clip_norm };
    agent.head_mut().apply(&grad, sgd.step_size(norm_sq));
    Ok(TrainStats {
        update,
        mean_reward: reward / batch.len() as f64,
        policy_loss: loss.policy,
        value_loss: loss.value,
        entropy: loss.entropy,
        grad_norm: norm_sq.sqrt(),
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}

/// `cfg.max_updates` rounds of collect-then-update. Each round's stats are
/// appended to `metrics` as one JSON line when given.
pub fn train<A: RlAgent>(
    agent: &mut A,
    env: &dyn EnvAgent,
    sampler: &EpisodeSampler,
    cfg: &A2CConfig,
    seed: u64,
    mut metrics: Option<&mut dyn Write>,
) -> Result<Vec<TrainStats>, RlError> {
    let clock = Instant::now();
    let mut out = Vec::with_capacity(cfg.max_updates);
    for u in 0..cfg.max_updates {
        let batch = collect_batch(agent, env, sampler, cfg, seed, u)?;
        let mut stats = a2c_update(agent, &batch, cfg, u)?;
        stats.wall_clock_s = clock.elapsed().as_secs_f64();
        if let Some(w) = metrics.as_deref_mut() {
            let line = serde_json::to_string(&stats).map_err(|e| TaskError::Schema(e.to_string()))?;
            writeln!(w, "{line}").map_err(TaskError::Io)?;
        }
        out.push(stats);
    }
    Ok(out)
}
