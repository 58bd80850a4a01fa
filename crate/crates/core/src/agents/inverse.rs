use std::path::Path;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::training::{text_bag, train_in_batch, CandidateSet, TrainConfig};
use super::AgentError;
use crate::neural::{
    is_segment_marker, load_checkpoint, param_checksum, save_checkpoint, BiEncoder, EncoderConfig,
    FeatureBag, TensorTable,
};
use crate::task::{
    flatten_observation, EpisodeLog, Observation, PlayerContext, PlayerPolicy, Speaker, TaskError,
    GOAL,
};
use crate::world::GameAction;

/// Player observation before an env action, with that action as the goal,
/// labelled with the player utterance that preceded it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseExample {
    pub log_id: String,
    /// Index of the labelled player turn within the log.
    pub turn: usize,
    pub observation: Observation,
    pub goal: GameAction,
    pub utterance: String,
}

/// One example per non-empty env action, in log order.
pub fn build_inverse_dataset(logs: &[&EpisodeLog]) -> Result<Vec<InverseExample>, TaskError> {
    let mut out = Vec::new();
    for log in logs {
        for (k, t) in log.turns.iter().enumerate() {
            if t.speaker != Speaker::Env {
                continue;
            }
            let Some(a) = &t.action else { continue };
            if k == 0 || log.turns[k - 1].speaker != Speaker::Player {
                return Err(TaskError::Schema(format!(
                    "log {}: env turn {k} does not follow a player turn",
                    log.id
                )));
            }
            let goal = crate::task::Goal::new(a.clone());
            out.push(InverseExample {
                log_id: log.id.clone(),
                turn: k - 1,
                observation: flatten_observation(&log.scenario.view(Speaker::Player), &log.turns[..k - 1], Some(&goal)),
                goal: a.clone(),
                utterance: log.turns[k - 1].utterance.clone(),
            });
        }
    }
    Ok(out)
}

/// Drops the goal segment, leaving everything else in place.
pub(crate) fn strip_goal(obs: &Observation) -> Observation {
    let mut tokens = Vec::with_capacity(obs.tokens.len());
    let mut skipping = false;
    for t in &obs.tokens {
        if is_segment_marker(t) {
            skipping = t == GOAL;
        }
        if !skipping {
            tokens.push(t.clone());
        }
    }
    Observation { tokens }
}

/// Behavioural-cloning retrieval model: (context, goal) to player utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseModel {
    pub bi: BiEncoder<f64>,
    pub goal_conditioned: bool,
    pub candidates: CandidateSet,
}

impl InverseModel {
    pub fn train<R: Rng>(
        data: &[InverseExample],
        utterances: Vec<String>,
        goal_conditioned: bool,
        enc: &EncoderConfig,
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> Result<(Self, Vec<f64>), AgentError> {
        let mut bi = BiEncoder::new(enc, rng);
        let pairs: Vec<(FeatureBag, FeatureBag, String)> = data
            .iter()
            .map(|e| {
                let obs = if goal_conditioned { e.observation.clone() } else { strip_goal(&e.observation) };
                (bi.context.featurize(&obs.tokens), text_bag(&bi.candidate, &e.utterance), e.utterance.clone())
            })
            .collect();
        let losses = train_in_batch(&mut bi, &pairs, cfg, rng)?;
        let candidates = CandidateSet::build(utterances, &bi.candidate)?;
        Ok((InverseModel { bi, goal_conditioned, candidates }, losses))
    }

    /// The observation this model consumes for a player context.
    pub fn observe(&self, ctx: &PlayerContext<'_>) -> Observation {
        ctx.observation(self.goal_conditioned)
    }

    pub fn embed(&self, obs: &Observation) -> Vec<f64> {
        self.bi.context.encode_tokens(&obs.tokens)
    }

    pub fn best(&self, obs: &Observation) -> &str {
        &self.candidates.texts[self.candidates.best(&self.embed(obs))]
    }

    pub fn checksum(&self) -> u64 {
        param_checksum(&self.bi.flat_params())
    }

    pub(crate) fn write(&self, prefix: &str, t: &mut TensorTable) {
        self.bi.write_tensors(prefix, t);
    }

    pub(crate) fn read(prefix: &str, t: &TensorTable, goal_conditioned: bool, texts: Vec<String>) -> Result<Self, AgentError> {
        let bi = BiEncoder::read_tensors(prefix, t)?;
        let candidates = CandidateSet::build(texts, &bi.candidate)?;
        Ok(InverseModel { bi, goal_conditioned, candidates })
    }

    pub fn save(&self, path: &Path) -> Result<(), AgentError> {
        let mut t = TensorTable::default();
        self.write("inverse", &mut t);
        let side = serde_json::json!({
            "kind": if self.goal_conditioned { "inverse" } else { "inverse-nogoal" },
            "goal_conditioned": self.goal_conditioned,
            "frozen": ["inverse"],
            "utterances": self.candidates.texts,
        });
        save_checkpoint(path, &t, &side)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let (t, side) = load_checkpoint(path)?;
        let kind = side["kind"].as_str().unwrap_or("");
        if kind != "inverse" && kind != "inverse-nogoal" {
            return Err(AgentError::Checkpoint(format!("{} is not an inverse model checkpoint", path.display())));
        }
        let texts: Vec<String> = serde_json::from_value(side["utterances"].clone())
            .map_err(|e| AgentError::Checkpoint(e.to_string()))?;
        Self::read("inverse", &t, kind == "inverse", texts)
    }
}

impl PlayerPolicy for InverseModel {
    fn utter(&self, ctx: &PlayerContext<'_>, _rng: &mut dyn RngCore) -> Result<String, TaskError> {
        Ok(self.best(&self.observe(ctx)).to_string())
    }
}
