use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

use super::episode::{EnvAgent, EnvContext, EnvResponse};
use super::observation::normalize_utterance;
use super::templates::{env_ack, trigger_utterances, trigger_verb, ENV_CANNOT, ENV_FILLER, ENV_REFUSE};
use super::scenario::Scenario;
use super::TaskError;
use crate::world::{enumerate_admissible, GameAction, WorldGraph};

/// Rule-based environment: complies with recognised requests and otherwise
/// chats, now and then acting on its own.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScriptedEnv {
    pub comply_prob: f64,
    pub spontaneous_prob: f64,
}

impl Default for ScriptedEnv {
    fn default() -> Self {
        ScriptedEnv { comply_prob: 0.97, spontaneous_prob: 0.05 }
    }
}

/// Admissible actions that `utterance` requests, addressed from `player`.
pub fn triggered_actions(
    utterance: &str,
    world: &WorldGraph,
    player: crate::world::EntityId,
    admissible: &[GameAction],
) -> Vec<GameAction> {
    let u = normalize_utterance(utterance);
    admissible
        .iter()
        .filter(|a| trigger_utterances(a, world, player).iter().any(|t| *t == u))
        .cloned()
        .collect()
}

impl ScriptedEnv {
    pub fn respond_rng<R: Rng + ?Sized>(&self, ctx: &EnvContext<'_>, rng: &mut R) -> EnvResponse {
        let roll: f64 = rng.gen();
        let u = ctx.last_player_utterance().unwrap_or("");
        let matched = triggered_actions(u, ctx.world, ctx.scenario.player.id, ctx.admissible);
        let pick = |xs: &[&'static str], rng: &mut R| xs.choose(rng).copied().unwrap_or("").to_string();
        if let Some(a) = matched.choose(rng).cloned() {
            if roll < self.comply_prob {
                return EnvResponse { utterance: pick(env_ack(&a), rng), action: Some(a) };
            }
            return EnvResponse { utterance: pick(ENV_REFUSE, rng), action: None };
        }
        if roll < self.spontaneous_prob && !ctx.admissible.is_empty() {
            let a = ctx.admissible.choose(rng).unwrap().clone();
            return EnvResponse { utterance: pick(env_ack(&a), rng), action: Some(a) };
        }
        let text = if trigger_verb(u).is_some() { ENV_CANNOT } else { ENV_FILLER };
        EnvResponse { utterance: pick(text, rng), action: None }
    }

    /// Probability that one reply to `utterance` is exactly `goal`.
    pub fn goal_probability(&self, ctx: &EnvContext<'_>, utterance: &str, goal: &GameAction) -> f64 {
        let matched = triggered_actions(utterance, ctx.world, ctx.scenario.player.id, ctx.admissible);
        if !matched.is_empty() {
            let hits = matched.iter().filter(|a| *a == goal).count();
            return self.comply_prob * hits as f64 / matched.len() as f64;
        }
        if ctx.admissible.contains(goal) {
            self.spontaneous_prob / ctx.admissible.len() as f64
        } else {
            0.0
        }
    }
}

impl ScriptedEnv {
    /// Success probability of a player who says one corpus utterance chosen
    /// uniformly at random, for a single reply from the initial state.
    pub fn chance_success_rate(&self, scenario: &Scenario, goal: &GameAction, utterances: &[String]) -> f64 {
        if utterances.is_empty() {
            return 0.0;
        }
        let world = &scenario.world;
        let admissible = enumerate_admissible(world, scenario.env_char.id);
        let mut triggers: HashMap<String, Vec<&GameAction>> = HashMap::new();
        for a in &admissible {
            for t in trigger_utterances(a, world, scenario.player.id) {
                let e = triggers.entry(t).or_default();
                if !e.contains(&a) {
                    e.push(a);
                }
            }
        }
        let spont = if admissible.contains(goal) { self.spontaneous_prob / admissible.len() as f64 } else { 0.0 };
        let total: f64 = utterances
            .iter()
            .map(|u| match triggers.get(&normalize_utterance(u)) {
                Some(acts) => self.comply_prob * acts.iter().filter(|a| **a == goal).count() as f64 / acts.len() as f64,
                None => spont,
            })
            .sum();
        total / utterances.len() as f64
    }
}

impl EnvAgent for ScriptedEnv {
    fn respond(&self, ctx: &EnvContext<'_>, rng: &mut dyn RngCore) -> Result<EnvResponse, TaskError> {
        Ok(self.respond_rng(ctx, rng))
    }
}
