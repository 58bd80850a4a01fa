//! Contextual bandit over the topic head: goal `g` is rewarded only for
//! topic `(3g + 1) mod C`.

use goalworld::agents::{AgentError, TopicHead};
use goalworld::neural::{categorical_sample, log_softmax, softmax, MlpPolicy, ValueHead};
use goalworld::rl::{PolicyHead, RlAgent, Trajectory, TrajectoryStep};
use goalworld::task::{EpisodeLog, Observation};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone)]
pub struct Bandit {
    pub head: TopicHead,
    pub topics: usize,
}

impl Bandit {
    pub fn new(topics: usize, rng: &mut ChaCha8Rng) -> Self {
        let head = TopicHead {
            policy: MlpPolicy::uniform(topics, 16, topics, 0.05, rng),
            value: ValueHead::zeros(topics),
            logit_scale: 5.0,
        };
        Bandit { head, topics }
    }

    pub fn correct(&self, g: usize) -> usize {
        (3 * g + 1) % self.topics
    }

    pub fn one_hot(&self, g: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.topics];
        x[g] = 1.0;
        x
    }

    /// One-step trajectories; `pay` decides the reward of `(goal, topic)`.
    pub fn batch(
        &self,
        n: usize,
        rng: &mut ChaCha8Rng,
        log: &EpisodeLog,
        pay: impl Fn(usize, usize) -> bool,
    ) -> Vec<Trajectory<Vec<f64>>> {
        (0..n)
            .map(|_| {
                let g = rng.gen_range(0..self.topics);
                let x = self.one_hot(g);
                let logits = self.head.logits(&x);
                let a = categorical_sample(&softmax(&logits), rng).unwrap();
                let reward = if pay(g, a) { 1.0 } else { 0.0 };
                let step = TrajectoryStep {
                    logprob: log_softmax(&logits)[a],
                    value: self.head.value(&x),
                    input: x,
                    action: a,
                    reward,
                    done: true,
                };
                let mut log = log.clone();
                log.reward = reward as u8;
                Trajectory { steps: vec![step], log }
            })
            .collect()
    }
}

impl RlAgent for Bandit {
    type Head = TopicHead;

    fn head(&self) -> &TopicHead {
        &self.head
    }

    fn head_mut(&mut self) -> &mut TopicHead {
        &mut self.head
    }

    fn head_input(&self, obs: &Observation) -> Result<Vec<f64>, AgentError> {
        let g = obs.tokens.first().and_then(|t| t.parse().ok()).unwrap_or(0);
        Ok(self.one_hot(g))
    }

    fn utterance(&self, _obs: &Observation, _x: &Vec<f64>, action: usize) -> String {
        format!("topic {action}")
    }

    fn frozen_checksum(&self) -> u64 {
        0
    }
}

/// Empty one-turn log carrying the batch reward.
pub fn blank_log() -> EpisodeLog {
    EpisodeLog {
        id: "bandit".into(),
        world_id: "bandit".into(),
        scenario: super::kitchen(),
        goal: None,
        turns: Vec::new(),
        reward: 0,
        turns_used: 1,
        partial: false,
    }
}
