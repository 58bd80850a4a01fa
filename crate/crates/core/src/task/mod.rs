//! Goal-oriented dialogue episodes on top of the world engine.

mod episode;
mod generator;
mod observation;
mod scenario;
mod scripted;
pub mod templates;

pub use episode::{
    apply_env_action, env_step, run_episode, sample_goal, EnvAgent, EnvContext, EnvResponse,
    EpisodeState, PlayerContext, PlayerPolicy, TaskConfig,
};
pub use generator::{
    audit_get_trigger, generate_synthetic_corpus, read_jsonl, write_jsonl, Corpus, GenConfig, Split,
    SplitManifest, WorldRecord,
};
pub use observation::*;
pub use scenario::{
    CharacterRef, EpisodeLog, Goal, GoalType, Scenario, ScenarioView, Speaker, TurnEvent,
};
pub use scripted::{triggered_actions, ScriptedEnv};

use thiserror::Error;

use crate::config::ConfigError;
use crate::world::WorldError;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("log {log} has no {goal_type} goal")]
    NoGoalAvailable { log: String, goal_type: GoalType },
    #[error("episode already finished")]
    EpisodeDone,
    #[error("environment agent chose an inadmissible action: {0}")]
    EnvAgentFault(WorldError),
    #[error("agent: {0}")]
    Agent(String),
    #[error("data: {0}")]
    Schema(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
