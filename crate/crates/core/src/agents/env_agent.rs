use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::training::{text_bag, train_in_batch, train_listwise, CandidateSet, TrainConfig};
use super::AgentError;
use crate::neural::{
    argmax, load_checkpoint, param_checksum, save_checkpoint, BiEncoder, EncoderConfig, FeatureBag,
    TensorTable,
};
use crate::scalar::dot;
use crate::task::{
    flatten_observation, EnvAgent, EnvContext, EnvResponse, EpisodeLog, Observation, Speaker,
    TaskError,
};
use crate::world::{apply_action, enumerate_admissible, render_action_text, EmoteKind, GameAction, WorldGraph};

/// Action candidate standing for "say something, do nothing".
pub const NO_ACTION: &str = "no_action";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvAgentConfig {
    pub encoder: EncoderConfig,
    pub speech: TrainConfig,
    pub actions: TrainConfig,
    /// Negatives kept per listwise action example.
    pub max_negatives: usize,
}

impl Default for EnvAgentConfig {
    fn default() -> Self {
        EnvAgentConfig {
            encoder: EncoderConfig::default(),
            speech: TrainConfig { epochs: 3, ..TrainConfig::default() },
            actions: TrainConfig { epochs: 10, batch_size: 16, ..TrainConfig::default() },
            max_negatives: 40,
        }
    }
}

/// Retrieval agent answering the player: one scorer picks the reply from
/// the utterance corpus, another picks an action among the admissible ones,
/// all emotes and [`NO_ACTION`].
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentAgent {
    pub speech: BiEncoder<f64>,
    pub acts: BiEncoder<f64>,
    pub utterances: CandidateSet,
}

/// Rendered action candidates in scoring order; `None` is the no-action entry.
pub(crate) fn action_candidates(admissible: &[GameAction], world: &WorldGraph) -> Vec<(String, Option<GameAction>)> {
    let mut out: Vec<(String, Option<GameAction>)> = admissible
        .iter()
        .map(|a| (render_action_text(a, world).unwrap_or_default(), Some(a.clone())))
        .collect();
    for e in EmoteKind::ALL {
        let a = GameAction::Emote(e);
        if !admissible.contains(&a) {
            out.push((e.as_str().to_string(), Some(a)));
        }
    }
    out.push((NO_ACTION.to_string(), None));
    out
}

struct EnvExample {
    context: FeatureBag,
    reply: String,
    candidates: Vec<String>,
    target: usize,
}

fn env_examples(logs: &[&EpisodeLog], agent: &EnvironmentAgent) -> Vec<EnvExample> {
    let mut out = Vec::new();
    for log in logs {
        let env = log.scenario.env_char.id;
        let mut world = log.scenario.world.clone();
        for (k, t) in log.turns.iter().enumerate() {
            if t.speaker != Speaker::Env {
                continue;
            }
            let obs = flatten_observation(&log.scenario.view(Speaker::Env), &log.turns[..k], None);
            let admissible = enumerate_admissible(&world, env);
            let cands = action_candidates(&admissible, &world);
            let Some(target) = cands.iter().position(|(_, a)| a.as_ref() == t.action.as_ref()) else {
                continue;
            };
            out.push(EnvExample {
                context: agent.speech.context.featurize(&obs.tokens),
                reply: t.utterance.clone(),
                candidates: cands.into_iter().map(|(s, _)| s).collect(),
                target,
            });
            if let Some(a) = &t.action {
                match apply_action(&world, env, a) {
                    Ok((w, _)) => world = w,
                    Err(_) => break,
                }
            }
        }
    }
    out
}

impl EnvironmentAgent {
    pub fn new<R: Rng>(cfg: &EnvAgentConfig, utterances: Vec<String>, rng: &mut R) -> Result<Self, AgentError> {
        let speech = BiEncoder::new(&cfg.encoder, rng);
        let acts = BiEncoder::new(&cfg.encoder, rng);
        let utterances = CandidateSet::build(utterances, &speech.candidate)?;
        Ok(EnvironmentAgent { speech, acts, utterances })
    }

    /// Fits both scorers on the env turns of `logs`. Returns the per-epoch
    /// losses of the speech and action scorers.
    pub fn train<R: Rng>(
        logs: &[&EpisodeLog],
        utterances: Vec<String>,
        cfg: &EnvAgentConfig,
        rng: &mut R,
    ) -> Result<(Self, Vec<f64>, Vec<f64>), AgentError> {
        let mut agent = Self::new(cfg, utterances.clone(), rng)?;
        let examples = env_examples(logs, &agent);
        if examples.is_empty() {
            return Err(AgentError::EmptyDataset);
        }
        let speech_pairs: Vec<(FeatureBag, FeatureBag, String)> = examples
            .iter()
            .map(|e| (e.context.clone(), text_bag(&agent.speech.candidate, &e.reply), e.reply.clone()))
            .collect();
        let speech_loss = train_in_batch(&mut agent.speech, &speech_pairs, &cfg.speech, rng)?;

        let act_examples: Vec<(FeatureBag, Vec<FeatureBag>, usize)> = examples
            .iter()
            .map(|e| {
                let mut neg: Vec<usize> = (0..e.candidates.len()).filter(|&i| i != e.target).collect();
                neg.shuffle(rng);
                neg.truncate(cfg.max_negatives);
                let mut idx = vec![e.target];
                idx.extend(neg);
                let bags = idx.iter().map(|&i| text_bag(&agent.acts.candidate, &e.candidates[i])).collect();
                (e.context.clone(), bags, 0)
            })
            .collect();
        let act_loss = train_listwise(&mut agent.acts, &act_examples, &cfg.actions, rng)?;
        agent.utterances = CandidateSet::build(utterances, &agent.speech.candidate)?;
        Ok((agent, speech_loss, act_loss))
    }

    /// Best reply and best action for an env-side observation.
    pub fn respond_obs(&self, obs: &Observation, admissible: &[GameAction], world: &WorldGraph) -> (String, Option<GameAction>) {
        let speech_ctx = self.speech.context.encode_tokens(&obs.tokens);
        let utterance = self.utterances.texts[self.utterances.best(&speech_ctx)].clone();
        let act_ctx = self.acts.context.encode_tokens(&obs.tokens);
        let cands = action_candidates(admissible, world);
        let scores: Vec<f64> = cands
            .iter()
            .map(|(text, _)| dot(&act_ctx, &self.acts.candidate.encode(&text_bag(&self.acts.candidate, text))))
            .collect();
        let best = argmax(&scores).unwrap_or(cands.len() - 1);
        (utterance, cands[best].1.clone())
    }

    pub fn checksum(&self) -> u64 {
        let mut p = self.speech.flat_params();
        p.extend(self.acts.flat_params());
        param_checksum(&p)
    }

    pub fn save(&self, path: &Path) -> Result<(), AgentError> {
        let mut t = TensorTable::default();
        self.speech.write_tensors("speech", &mut t);
        self.acts.write_tensors("acts", &mut t);
        let side = serde_json::json!({
            "kind": "env",
            "frozen": ["speech", "acts"],
            "utterances": self.utterances.texts,
        });
        save_checkpoint(path, &t, &side)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let (t, side) = load_checkpoint(path)?;
        if side["kind"] != "env" {
            return Err(AgentError::Checkpoint(format!("{} is not an env agent checkpoint", path.display())));
        }
        let texts: Vec<String> = serde_json::from_value(side["utterances"].clone())
            .map_err(|e| AgentError::Checkpoint(e.to_string()))?;
        let speech = BiEncoder::read_tensors("speech", &t)?;
        let acts = BiEncoder::read_tensors("acts", &t)?;
        let utterances = CandidateSet::build(texts, &speech.candidate)?;
        Ok(EnvironmentAgent { speech, acts, utterances })
    }
}

impl EnvAgent for EnvironmentAgent {
    fn respond(&self, ctx: &EnvContext<'_>, _rng: &mut dyn RngCore) -> Result<EnvResponse, TaskError> {
        let (utterance, action) = self.respond_obs(&ctx.observation(), ctx.admissible, ctx.world);
        Ok(EnvResponse { utterance, action })
    }
}
