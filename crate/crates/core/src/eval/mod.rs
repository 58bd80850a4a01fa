//! Evaluation harness: greedy rollouts on fixed episode starts, per-goal
//! breakdowns, achievability, repeats, utterance rankings and paired tests.

mod render;
mod stats;

pub use render::{render_report, render_reports};
pub use stats::{paired_sign_test, PairedTest};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::AgentError;
use crate::rl::{utterance_distribution, RlAgent};
use crate::rng::stream;
use crate::task::{
    env_step, run_episode, sample_goal, EnvAgent, EpisodeLog, EpisodeState, Goal, GoalType,
    PlayerContext, PlayerPolicy, Scenario, ScriptedEnv, TaskConfig, TaskError,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no {0} episodes available for evaluation")]
    EmptySplit(GoalType),
    #[error("paired samples differ in length: {0} vs {1}")]
    Unpaired(usize, usize),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

/// A scenario and goal to evaluate from, shared across models so that
/// results pair up episode by episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStart {
    pub id: String,
    pub world_id: String,
    pub scenario: Scenario,
    pub goal: Goal,
}

/// `count` starts drawn by cycling through the eligible logs in order and
/// sampling one goal per visit.
pub fn episode_starts(
    logs: &[&EpisodeLog],
    goal_type: GoalType,
    count: usize,
    seed: u64,
) -> Result<Vec<EpisodeStart>, EvalError> {
    let eligible: Vec<&EpisodeLog> = logs
        .iter()
        .copied()
        .filter(|l| l.env_actions().any(|a| GoalType::of(a) == goal_type))
        .collect();
    if eligible.is_empty() || count == 0 {
        return Err(EvalError::EmptySplit(goal_type));
    }
    let mut out = Vec::with_capacity(count);
    for pass in 0.. {
        for (i, log) in eligible.iter().enumerate() {
            if out.len() == count {
                return Ok(out);
            }
            let (scenario, goal) = sample_goal(log, goal_type, &mut stream(seed, &[pass, i as u64]))?;
            out.push(EpisodeStart {
                id: format!("{}#{pass}", log.id),
                world_id: log.world_id.clone(),
                scenario,
                goal,
            });
        }
    }
    unreachable!()
}

/// What is being evaluated and under which horizon and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSpec {
    pub model: String,
    pub split: String,
    pub goal_type: GoalType,
    pub horizon: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalRow {
    pub key: String,
    pub count: usize,
    pub successes: usize,
    pub success_pct: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GoalBreakdown {
    pub verbs: Vec<GoalRow>,
    pub emotes: Vec<GoalRow>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RepeatStats {
    pub episodes: usize,
    pub episodes_with_repeat: usize,
    pub utterances: usize,
    pub repeated_utterances: usize,
    pub episode_fraction: f64,
    pub utterance_fraction: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub episodes: usize,
    pub successes: usize,
    pub mean_reward: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Achievability {
    pub achievable: ClassStats,
    pub unachievable: ClassStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub split: String,
    pub goal_type: GoalType,
    pub horizon: usize,
    pub seed: u64,
    pub episodes: usize,
    pub successes: usize,
    pub mean_reward: f64,
    pub mean_turns: f64,
    pub verbs: Vec<GoalRow>,
    pub emotes: Vec<GoalRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub achievability: Option<Achievability>,
    pub repeats: RepeatStats,
    #[serde(default)]
    pub config: BTreeMap<String, String>,
}

impl EvalReport {
    pub fn from_logs(spec: &EvalSpec, logs: &[EpisodeLog]) -> Result<Self, EvalError> {
        if logs.is_empty() {
            return Err(EvalError::EmptySplit(spec.goal_type));
        }
        let successes = logs.iter().filter(|l| l.reward == 1).count();
        let breakdown = breakdown_by_goal(logs);
        Ok(EvalReport {
            model: spec.model.clone(),
            split: spec.split.clone(),
            goal_type: spec.goal_type,
            horizon: spec.horizon,
            seed: spec.seed,
            episodes: logs.len(),
            successes,
            mean_reward: successes as f64 / logs.len() as f64,
            mean_turns: mean_turns(logs, spec.horizon),
            verbs: breakdown.verbs,
            emotes: breakdown.emotes,
            achievability: None,
            repeats: repeat_stats(logs),
            config: BTreeMap::new(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, TaskError> {
        serde_json::from_str(text).map_err(|e| TaskError::Schema(e.to_string()))
    }
}

/// Rolls out `policy` from every start. Episode `i` draws from stream
/// `[i]` under `seed`, so results do not depend on scheduling.
pub fn rollout(
    policy: &dyn PlayerPolicy,
    env_agent: &dyn EnvAgent,
    starts: &[EpisodeStart],
    horizon: usize,
    seed: u64,
) -> Result<Vec<EpisodeLog>, EvalError> {
    let cfg = TaskConfig { horizon, goal_type: GoalType::GameAct, seed };
    starts
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = stream(seed, &[i as u64]);
            let mut log = run_episode(policy, env_agent, &s.scenario, &s.goal, &cfg, &mut rng)?;
            log.id = s.id.clone();
            log.world_id = s.world_id.clone();
            Ok(log)
        })
        .collect()
}

/// Evaluates a policy; pass a greedy policy for reproducible reports.
pub fn evaluate_policy(
    policy: &dyn PlayerPolicy,
    env_agent: &dyn EnvAgent,
    starts: &[EpisodeStart],
    spec: &EvalSpec,
) -> Result<(EvalReport, Vec<EpisodeLog>), EvalError> {
    if starts.is_empty() {
        return Err(EvalError::EmptySplit(spec.goal_type));
    }
    let logs = rollout(policy, env_agent, starts, spec.horizon, spec.seed)?;
    Ok((EvalReport::from_logs(spec, &logs)?, logs))
}

/// Runs a policy trained for one turn under a three-turn horizon.
pub fn transfer_1step_3x(
    policy: &dyn PlayerPolicy,
    env_agent: &dyn EnvAgent,
    starts: &[EpisodeStart],
    spec: &EvalSpec,
) -> Result<(EvalReport, Vec<EpisodeLog>), EvalError> {
    let spec = EvalSpec { model: format!("{} (1-step 3x)", spec.model), horizon: 3, ..spec.clone() };
    evaluate_policy(policy, env_agent, starts, &spec)
}

/// Successes take the turns they used; failures count the full horizon.
pub fn mean_turns(logs: &[EpisodeLog], horizon: usize) -> f64 {
    if logs.is_empty() {
        return 0.0;
    }
    let total: usize = logs
        .iter()
        .map(|l| if l.reward == 1 { l.turns_used } else { horizon })
        .sum();
    total as f64 / logs.len() as f64
}

fn rows(counts: BTreeMap<&'static str, (usize, usize)>) -> Vec<GoalRow> {
    let mut rows: Vec<GoalRow> = counts
        .into_iter()
        .map(|(k, (n, s))| GoalRow {
            key: k.to_string(),
            count: n,
            successes: s,
            success_pct: 100.0 * s as f64 / n as f64,
        })
        .collect();
    rows.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.key.cmp(&b.key)));
    rows
}

/// Per-verb and per-emote success, most frequent goals first.
pub fn breakdown_by_goal(logs: &[EpisodeLog]) -> GoalBreakdown {
    let mut verbs = BTreeMap::new();
    let mut emotes = BTreeMap::new();
    for log in logs {
        let Some(goal) = &log.goal else { continue };
        let table = match goal.goal_type {
            GoalType::GameAct => &mut verbs,
            GoalType::Emote => &mut emotes,
        };
        let e: &mut (usize, usize) = table.entry(goal.target.goal_key()).or_default();
        e.0 += 1;
        e.1 += usize::from(log.reward == 1);
    }
    GoalBreakdown { verbs: rows(verbs), emotes: rows(emotes) }
}

fn squash_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Exact repeats among each episode's player utterances after whitespace
/// normalisation. A repeat is an utterance equal to an earlier one.
pub fn repeat_stats(logs: &[EpisodeLog]) -> RepeatStats {
    let mut st = RepeatStats { episodes: logs.len(), ..Default::default() };
    for log in logs {
        let mut seen: Vec<String> = Vec::new();
        let mut repeated = 0;
        for u in log.player_utterances() {
            let u = squash_whitespace(u);
            if seen.contains(&u) {
                repeated += 1;
            } else {
                seen.push(u);
            }
            st.utterances += 1;
        }
        st.repeated_utterances += repeated;
        st.episodes_with_repeat += usize::from(repeated > 0);
    }
    if st.episodes > 0 {
        st.episode_fraction = st.episodes_with_repeat as f64 / st.episodes as f64;
    }
    if st.utterances > 0 {
        st.utterance_fraction = st.repeated_utterances as f64 / st.utterances as f64;
    }
    st
}

/// True when some utterance in `space` makes the environment take the goal
/// on the first turn. The environment draws from stream `[i]` afresh for
/// every candidate.
pub fn one_step_achievable(
    start: &EpisodeStart,
    space: &[String],
    env_agent: &dyn EnvAgent,
    seed: u64,
    i: usize,
) -> Result<bool, EvalError> {
    let state = EpisodeState::new(start.scenario.clone(), start.goal.clone(), 1);
    for u in space {
        let (_, _, reward, _) = env_step(&state, u, env_agent, &mut stream(seed, &[i as u64]))?;
        if reward == 1 {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Splits evaluated episodes by whether the agent's own action space
/// contains a one-turn solution. `logs[i]` must be the rollout of
/// `starts[i]`.
pub fn achievability_split<F>(
    space: F,
    env_agent: &dyn EnvAgent,
    starts: &[EpisodeStart],
    logs: &[EpisodeLog],
    seed: u64,
) -> Result<Achievability, EvalError>
where
    F: Fn(&PlayerContext<'_>) -> Result<Vec<String>, AgentError> + Sync,
{
    if starts.len() != logs.len() {
        return Err(EvalError::Unpaired(starts.len(), logs.len()));
    }
    let flags: Vec<bool> = starts
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let state = EpisodeState::new(s.scenario.clone(), s.goal.clone(), 1);
            let candidates = space(&state.player_context())?;
            one_step_achievable(s, &candidates, env_agent, seed, i)
        })
        .collect::<Result<_, EvalError>>()?;
    let mut out = Achievability::default();
    for (ok, log) in flags.into_iter().zip(logs) {
        let class = if ok { &mut out.achievable } else { &mut out.unachievable };
        class.episodes += 1;
        class.successes += usize::from(log.reward == 1);
    }
    for class in [&mut out.achievable, &mut out.unachievable] {
        if class.episodes > 0 {
            class.mean_reward = class.successes as f64 / class.episodes as f64;
        }
    }
    Ok(out)
}

/// The action space of an RL agent as seen from a player context.
pub fn agent_space<A: RlAgent>(agent: &A) -> impl Fn(&PlayerContext<'_>) -> Result<Vec<String>, AgentError> + Sync + '_ {
    move |ctx| crate::rl::action_space_utterances(agent, &agent.observe(ctx))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedUtterance {
    pub utterance: String,
    pub mean_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerbUtterances {
    pub verb: String,
    pub episodes: usize,
    pub top: Vec<RankedUtterance>,
}

/// For each goal verb, the utterances with the highest probability under
/// the agent at the first turn, averaged over that verb's episodes.
pub fn top_utterances_by_verb<A: RlAgent>(
    agent: &A,
    starts: &[EpisodeStart],
    top: usize,
) -> Result<Vec<VerbUtterances>, EvalError> {
    let mut acc: BTreeMap<&'static str, (usize, BTreeMap<String, f64>)> = BTreeMap::new();
    for s in starts {
        let state = EpisodeState::new(s.scenario.clone(), s.goal.clone(), 1);
        let obs = agent.observe(&state.player_context());
        let dist = utterance_distribution(agent, &obs)?;
        let e = acc.entry(s.goal.target.goal_key()).or_default();
        e.0 += 1;
        for (u, p) in dist {
            *e.1.entry(u).or_default() += p;
        }
    }
    Ok(acc
        .into_iter()
        .map(|(verb, (n, probs))| {
            let mut ranked: Vec<RankedUtterance> = probs
                .into_iter()
                .map(|(utterance, p)| RankedUtterance { utterance, mean_prob: p / n as f64 })
                .collect();
            ranked.sort_by(|a, b| b.mean_prob.total_cmp(&a.mean_prob).then_with(|| a.utterance.cmp(&b.utterance)));
            ranked.truncate(top);
            VerbUtterances { verb: verb.to_string(), episodes: n, top: ranked }
        })
        .collect())
}

/// Expected one-turn reward of a uniformly random corpus utterance against
/// the scripted environment.
pub fn chance_rate(env: &ScriptedEnv, starts: &[EpisodeStart], utterances: &[String]) -> f64 {
    if starts.is_empty() {
        return 0.0;
    }
    let total: f64 = starts
        .par_iter()
        .map(|s| env.chance_success_rate(&s.scenario, &s.goal.target, utterances))
        .sum();
    total / starts.len() as f64
}

/// Per-episode rewards, in start order.
pub fn rewards(logs: &[EpisodeLog]) -> Vec<u8> {
    logs.iter().map(|l| l.reward).collect()
}
