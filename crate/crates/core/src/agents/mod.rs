//! Environment agent, inverse model, Topic and Top-K players, and the
//! random-utterance baseline.

mod baseline;
mod env_agent;
mod inverse;
mod topic;
mod topk;
mod training;

pub use baseline::RandomUtterance;
pub use env_agent::{EnvAgentConfig, EnvironmentAgent, NO_ACTION};
pub use inverse::{build_inverse_dataset, InverseExample, InverseModel};
pub use topic::{pretrain_topic_components, TopicAct, TopicAgent, TopicConfig, TopicHead};
pub use topk::{AttentionHead, LinearHead, TopKAct, TopKAgent, TopKHead, TopKInput, TopKVariant};
pub use training::{train_in_batch, CandidateSet, TrainConfig};

use thiserror::Error;

use crate::neural::NeuralError;
use crate::task::TaskError;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("candidate corpus is empty")]
    EmptyCorpus,
    #[error("candidate corpus has {have} entries, need at least {need}")]
    CorpusTooSmall { need: usize, have: usize },
    #[error("training data is empty")]
    EmptyDataset,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

impl From<AgentError> for TaskError {
    fn from(e: AgentError) -> Self {
        TaskError::Agent(e.to_string())
    }
}

/// Sampling for training, argmax for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActMode {
    Sample,
    Greedy,
}
