use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::observation::{flatten_observation, Observation};
use super::scenario::{EpisodeLog, Goal, GoalType, Scenario, Speaker, TurnEvent};
use super::TaskError;
use crate::world::{apply_action, enumerate_admissible, GameAction, WorldGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub horizon: usize,
    pub goal_type: GoalType,
    pub seed: u64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig { horizon: 1, goal_type: GoalType::GameAct, seed: 0 }
    }
}

/// Everything the environment side may condition on for one reply.
pub struct EnvContext<'a> {
    pub scenario: &'a Scenario,
    pub world: &'a WorldGraph,
    /// Includes the player utterance being answered.
    pub history: &'a [TurnEvent],
    /// Admissible game actions and all emotes, in engine order.
    pub admissible: &'a [GameAction],
}

impl EnvContext<'_> {
    pub fn observation(&self) -> Observation {
        flatten_observation(&self.scenario.view(Speaker::Env), self.history, None)
    }

    pub fn last_player_utterance(&self) -> Option<&str> {
        self.history
            .iter()
            .rev()
            .find(|t| t.speaker == Speaker::Player)
            .map(|t| t.utterance.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvResponse {
    pub utterance: String,
    pub action: Option<GameAction>,
}

pub trait EnvAgent: Send + Sync {
    fn respond(&self, ctx: &EnvContext<'_>, rng: &mut dyn RngCore) -> Result<EnvResponse, TaskError>;
}

/// What the player side may condition on.
pub struct PlayerContext<'a> {
    pub scenario: &'a Scenario,
    pub history: &'a [TurnEvent],
    pub goal: &'a Goal,
}

impl PlayerContext<'_> {
    pub fn observation(&self, goal_conditioned: bool) -> Observation {
        let g = goal_conditioned.then_some(self.goal);
        flatten_observation(&self.scenario.view(Speaker::Player), self.history, g)
    }
}

pub trait PlayerPolicy: Send + Sync {
    fn utter(&self, ctx: &PlayerContext<'_>, rng: &mut dyn RngCore) -> Result<String, TaskError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeState {
    pub scenario: Scenario,
    pub world: WorldGraph,
    pub goal: Goal,
    pub history: Vec<TurnEvent>,
    pub horizon: usize,
    pub turns_used: usize,
    pub reward: u8,
    pub done: bool,
}

impl EpisodeState {
    pub fn new(scenario: Scenario, goal: Goal, horizon: usize) -> Self {
        EpisodeState {
            world: scenario.world.clone(),
            scenario,
            goal,
            history: Vec::new(),
            horizon: horizon.max(1),
            turns_used: 0,
            reward: 0,
            done: false,
        }
    }

    pub fn player_context(&self) -> PlayerContext<'_> {
        PlayerContext { scenario: &self.scenario, history: &self.history, goal: &self.goal }
    }

    pub fn into_log(self, id: impl Into<String>, world_id: impl Into<String>) -> EpisodeLog {
        EpisodeLog {
            id: id.into(),
            world_id: world_id.into(),
            scenario: self.scenario,
            goal: Some(self.goal),
            turns: self.history,
            reward: self.reward,
            turns_used: self.turns_used,
            partial: false,
        }
    }
}

/// One player turn and the environment's reply.
pub fn env_step(
    state: &EpisodeState,
    player_utterance: &str,
    env_agent: &dyn EnvAgent,
    rng: &mut dyn RngCore,
) -> Result<(EpisodeState, TurnEvent, u8, bool), TaskError> {
    if state.done {
        return Err(TaskError::EpisodeDone);
    }
    let mut next = state.clone();
    next.history.push(TurnEvent::player(player_utterance));
    let admissible = enumerate_admissible(&next.world, next.scenario.env_char.id);
    let reply = env_agent.respond(
        &EnvContext {
            scenario: &next.scenario,
            world: &next.world,
            history: &next.history,
            admissible: &admissible,
        },
        rng,
    )?;
    apply_env_action(&mut next, reply.action.as_ref())?;
    let event = TurnEvent::env(reply.utterance, reply.action);
    next.history.push(event.clone());
    let reward = next.reward;
    let done = next.done;
    Ok((next, event, reward, done))
}

/// Applies an env action (if any) and advances turn accounting.
pub fn apply_env_action(state: &mut EpisodeState, action: Option<&GameAction>) -> Result<(), TaskError> {
    if let Some(a) = action {
        let (w, _) = apply_action(&state.world, state.scenario.env_char.id, a)
            .map_err(TaskError::EnvAgentFault)?;
        state.world = w;
    }
    state.turns_used += 1;
    if state.goal.achieved_by(action) {
        state.reward = 1;
        state.done = true;
    } else if state.turns_used >= state.horizon {
        state.done = true;
    }
    Ok(())
}

pub fn run_episode(
    policy: &dyn PlayerPolicy,
    env_agent: &dyn EnvAgent,
    scenario: &Scenario,
    goal: &Goal,
    cfg: &TaskConfig,
    rng: &mut dyn RngCore,
) -> Result<EpisodeLog, TaskError> {
    let mut state = EpisodeState::new(scenario.clone(), goal.clone(), cfg.horizon);
    while !state.done {
        let u = policy.utter(&state.player_context(), rng)?;
        state = env_step(&state, &u, env_agent, rng)?.0;
    }
    Ok(state.into_log(String::new(), String::new()))
}

/// Uniformly picks one of the log's env actions of the requested type.
pub fn sample_goal<R: Rng + ?Sized>(
    log: &EpisodeLog,
    goal_type: GoalType,
    rng: &mut R,
) -> Result<(Scenario, Goal), TaskError> {
    let support: Vec<&GameAction> = log
        .env_actions()
        .filter(|a| GoalType::of(a) == goal_type)
        .collect();
    if support.is_empty() {
        return Err(TaskError::NoGoalAvailable { log: log.id.clone(), goal_type });
    }
    let a = support[rng.gen_range(0..support.len())];
    Ok((log.scenario.clone(), Goal::new(a.clone())))
}
