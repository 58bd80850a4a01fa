//! Synchronous advantage actor-critic over a frozen-encoder agent's
//! trainable head.

mod a2c;

pub use a2c::{
    a2c_loss_and_grad, a2c_update, collect_batch, compute_returns_advantages, train, A2CConfig,
    A2CLoss, A2CSample, EpisodeSampler, RlError, TrainStats, Trajectory, TrajectoryStep,
};

use rand::RngCore;

use crate::agents::{ActMode, AgentError};
use crate::neural::{categorical_sample, log_softmax, softmax};
use crate::task::{Observation, PlayerContext, PlayerPolicy, TaskError};

/// The trainable part of an agent: a categorical policy and a value estimate
/// over a per-step input computed by frozen components.
pub trait PolicyHead: Clone + Send + Sync {
    type Input: Clone + Send + Sync;
    type Grad: Send;

    fn logits(&self, x: &Self::Input) -> Vec<f64>;
    fn value(&self, x: &Self::Input) -> f64;
    fn zero_grad(&self) -> Self::Grad;
    /// Adds the parameter gradient implied by `∂L/∂logits` and `∂L/∂value`.
    fn accumulate(&self, x: &Self::Input, d_logits: &[f64], d_value: f64, grad: &mut Self::Grad);
    fn grad_norm_sq(grad: &Self::Grad) -> f64;
    fn grad_flat(grad: &Self::Grad) -> Vec<f64>;
    fn apply(&mut self, grad: &Self::Grad, step: f64);
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, p: &[f64]);
}

/// An agent whose only RL-trainable parameters live in its head.
pub trait RlAgent: Send + Sync {
    type Head: PolicyHead;

    fn head(&self) -> &Self::Head;
    fn head_mut(&mut self) -> &mut Self::Head;
    fn head_input(&self, obs: &Observation) -> Result<<Self::Head as PolicyHead>::Input, AgentError>;
    /// Utterance produced by choosing `action` for this observation.
    fn utterance(&self, obs: &Observation, x: &<Self::Head as PolicyHead>::Input, action: usize) -> String;
    /// Digest of every parameter that must not change during RL.
    fn frozen_checksum(&self) -> u64;

    fn observe(&self, ctx: &PlayerContext<'_>) -> Observation {
        ctx.observation(true)
    }
}

/// One decision: chosen index, its log-probability, the value estimate and
/// the resulting utterance.
#[derive(Debug, Clone)]
pub struct Decision<I> {
    pub input: I,
    pub action: usize,
    pub logprob: f64,
    pub value: f64,
    pub utterance: String,
}

pub fn decide<A: RlAgent, R: rand::Rng + ?Sized>(
    agent: &A,
    obs: &Observation,
    mode: ActMode,
    rng: &mut R,
) -> Result<Decision<<A::Head as PolicyHead>::Input>, AgentError> {
    let x = agent.head_input(obs)?;
    let logits = agent.head().logits(&x);
    let action = match mode {
        ActMode::Greedy => crate::neural::argmax(&logits).unwrap_or(0),
        ActMode::Sample => categorical_sample(&softmax(&logits), rng)?,
    };
    let logprob = log_softmax(&logits)[action];
    let value = agent.head().value(&x);
    let utterance = agent.utterance(obs, &x, action);
    Ok(Decision { input: x, action, logprob, value, utterance })
}

/// Probability of each distinct utterance the agent can produce for `obs`,
/// merging actions that lead to the same text.
pub fn utterance_distribution<A: RlAgent>(agent: &A, obs: &Observation) -> Result<Vec<(String, f64)>, AgentError> {
    let x = agent.head_input(obs)?;
    let probs = softmax(&agent.head().logits(&x));
    let mut out: Vec<(String, f64)> = Vec::new();
    for (i, p) in probs.into_iter().enumerate() {
        let u = agent.utterance(obs, &x, i);
        match out.iter_mut().find(|(t, _)| *t == u) {
            Some(e) => e.1 += p,
            None => out.push((u, p)),
        }
    }
    Ok(out)
}

/// Every utterance reachable by some action, in action order.
pub fn action_space_utterances<A: RlAgent>(agent: &A, obs: &Observation) -> Result<Vec<String>, AgentError> {
    let x = agent.head_input(obs)?;
    let n = agent.head().logits(&x).len();
    Ok((0..n).map(|i| agent.utterance(obs, &x, i)).collect())
}

/// Adapts an [`RlAgent`] to the episode loop.
pub struct RlPolicy<'a, A> {
    pub agent: &'a A,
    pub mode: ActMode,
}

impl<A: RlAgent> PlayerPolicy for RlPolicy<'_, A> {
    fn utter(&self, ctx: &PlayerContext<'_>, rng: &mut dyn RngCore) -> Result<String, TaskError> {
        let obs = self.agent.observe(ctx);
        Ok(decide(self.agent, &obs, self.mode, rng)?.utterance)
    }
}
