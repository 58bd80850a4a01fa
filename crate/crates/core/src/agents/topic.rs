use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::inverse::{InverseExample, InverseModel};
use super::training::{text_bag, train_in_batch, CandidateSet, TrainConfig};
use super::{ActMode, AgentError};
use crate::neural::{
    kmeans_fit, load_checkpoint, param_checksum, save_checkpoint, BiEncoder, FeatureBag,
    KMeansModel, Matrix, MlpGrad, MlpPolicy, Tensor, TensorTable, TextEncoder, ValueHead,
};
use crate::rl::{decide, PolicyHead, RlAgent};
use crate::scalar::norm_sq;
use crate::task::Observation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopicConfig {
    pub clusters: usize,
    pub hidden: usize,
    /// Half-width of the uniform initialisation of the policy MLP.
    pub init_scale: f64,
    /// Multiplier turning the policy's tanh outputs into logits.
    pub logit_scale: f64,
    pub utterance_model: TrainConfig,
}

impl Default for TopicConfig {
    fn default() -> Self {
        TopicConfig {
            clusters: 50,
            hidden: 64,
            init_scale: 0.05,
            logit_scale: 5.0,
            utterance_model: TrainConfig { epochs: 4, ..TrainConfig::default() },
        }
    }
}

/// `P_C` and the value head. Logits are `logit_scale · tanh(...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicHead {
    pub policy: MlpPolicy<f64>,
    pub value: ValueHead<f64>,
    pub logit_scale: f64,
}

pub struct TopicGrad {
    pub policy: MlpGrad<f64>,
    pub value_w: Vec<f64>,
    pub value_b: f64,
}

impl PolicyHead for TopicHead {
    type Input = Vec<f64>;
    type Grad = TopicGrad;

    fn logits(&self, s: &Vec<f64>) -> Vec<f64> {
        let out = self.policy.forward(s).expect("state matches policy input");
        out.into_iter().map(|h| self.logit_scale * h).collect()
    }

    fn value(&self, s: &Vec<f64>) -> f64 {
        self.value.forward(s)
    }

    fn zero_grad(&self) -> TopicGrad {
        TopicGrad { policy: self.policy.zero_grad(), value_w: vec![0.0; self.value.w.len()], value_b: 0.0 }
    }

    fn accumulate(&self, s: &Vec<f64>, d_logits: &[f64], d_value: f64, g: &mut TopicGrad) {
        let cache = self.policy.forward_cached(s).expect("state matches policy input");
        let d_out: Vec<f64> = d_logits.iter().map(|d| d * self.logit_scale).collect();
        self.policy.backward(s, &cache, &d_out, &mut g.policy);
        let (gw, gb) = self.value.grad(s, d_value);
        crate::scalar::axpy(1.0, &gw, &mut g.value_w);
        g.value_b += gb;
    }

    fn grad_norm_sq(g: &TopicGrad) -> f64 {
        g.policy.norm_sq() + norm_sq(&g.value_w) + g.value_b * g.value_b
    }

    fn grad_flat(g: &TopicGrad) -> Vec<f64> {
        let mut v = g.policy.to_flat();
        v.extend_from_slice(&g.value_w);
        v.push(g.value_b);
        v
    }

    fn apply(&mut self, g: &TopicGrad, step: f64) {
        self.policy.apply(&g.policy, step);
        self.value.apply(&g.value_w, g.value_b, step);
    }

    fn params(&self) -> Vec<f64> {
        let mut v = self.policy.flat_params();
        v.extend(self.value.flat_params());
        v
    }

    fn set_params(&mut self, p: &[f64]) {
        let n = self.policy.flat_params().len();
        self.policy.set_flat_params(&p[..n]).expect("parameter count");
        let d = self.value.w.len();
        self.value.w.copy_from_slice(&p[n..n + d]);
        self.value.b = p[n + d];
    }
}

/// Topic RL player: `u = T_u(O ⊕ c)`, `c ~ P_C(T_s(O))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicAgent {
    pub t_s: TextEncoder<f64>,
    pub kmeans: KMeansModel<f64>,
    pub head: TopicHead,
    pub t_u: BiEncoder<f64>,
    pub candidates: CandidateSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicAct {
    pub utterance: String,
    pub topic: usize,
    pub logprob: f64,
    pub value: f64,
}

/// Clusters inverse-model embeddings of the training observations, then
/// trains `T_u` (warm-started from the inverse model) on topic-tagged
/// observations. Returns the agent and the `T_u` epoch losses.
pub fn pretrain_topic_components<R: Rng>(
    inverse: &InverseModel,
    data: &[InverseExample],
    cfg: &TopicConfig,
    rng: &mut R,
) -> Result<(TopicAgent, Vec<f64>), AgentError> {
    if data.is_empty() {
        return Err(AgentError::EmptyDataset);
    }
    let t_s = inverse.bi.context.clone();
    let states: Vec<Vec<f64>> = data.iter().map(|e| t_s.encode_tokens(&e.observation.tokens)).collect();
    let kmeans = kmeans_fit(&states, cfg.clusters, rng)?;

    let mut t_u = inverse.bi.clone();
    let pairs: Vec<(FeatureBag, FeatureBag, String)> = data
        .iter()
        .zip(&states)
        .map(|(e, s)| {
            let obs = e.observation.with_topic(kmeans.assign(s));
            (t_u.context.featurize(&obs.tokens), text_bag(&t_u.candidate, &e.utterance), e.utterance.clone())
        })
        .collect();
    let losses = train_in_batch(&mut t_u, &pairs, &cfg.utterance_model, rng)?;
    let candidates = CandidateSet::build(inverse.candidates.texts.clone(), &t_u.candidate)?;
    let d = t_s.dim();
    let head = TopicHead {
        policy: MlpPolicy::uniform(d, cfg.hidden, cfg.clusters, cfg.init_scale, rng),
        value: ValueHead::zeros(d),
        logit_scale: cfg.logit_scale,
    };
    Ok((TopicAgent { t_s, kmeans, head, t_u, candidates }, losses))
}

impl TopicAgent {
    pub fn clusters(&self) -> usize {
        self.head.policy.outputs()
    }

    pub fn state(&self, obs: &Observation) -> Vec<f64> {
        self.t_s.encode_tokens(&obs.tokens)
    }

    /// `T_u`'s best utterance for the observation tagged with topic `c`.
    pub fn topic_utterance(&self, obs: &Observation, c: usize) -> &str {
        let ctx = self.t_u.context.encode_tokens(&obs.with_topic(c).tokens);
        &self.candidates.texts[self.candidates.best(&ctx)]
    }

    pub fn topic_act<R: Rng + ?Sized>(&self, obs: &Observation, mode: ActMode, rng: &mut R) -> Result<TopicAct, AgentError> {
        let d = decide(self, obs, mode, rng)?;
        Ok(TopicAct { utterance: d.utterance, topic: d.action, logprob: d.logprob, value: d.value })
    }

    /// The same agent with a policy that is uniform over topics.
    pub fn with_uniform_policy(&self) -> TopicAgent {
        let mut a = self.clone();
        let p = &mut a.head.policy;
        *p = MlpPolicy::zeros(p.input_dim(), p.b1.len(), p.outputs());
        a
    }

    pub fn save(&self, path: &Path) -> Result<(), AgentError> {
        let mut t = TensorTable::default();
        self.t_s.write_tensors("t_s", &mut t);
        self.t_u.write_tensors("t_u", &mut t);
        let k = self.kmeans.centroids.len();
        let d = self.kmeans.centroids.first().map_or(0, Vec::len);
        let flat: Vec<f64> = self.kmeans.centroids.concat();
        t.insert("kmeans.centroids", Tensor::matrix(&Matrix::from_vec(k, d, flat)));
        t.insert("kmeans.inertia", Tensor::scalar(self.kmeans.inertia));
        t.insert("kmeans.trace", Tensor::vector(&self.kmeans.inertia_trace));
        self.head.policy.write_tensors("policy", &mut t);
        self.head.value.write_tensors("value", &mut t);
        let side = serde_json::json!({
            "kind": "topic",
            "clusters": self.clusters(),
            "logit_scale": self.head.logit_scale,
            "frozen": ["t_s", "t_u", "kmeans"],
            "trainable": ["policy", "value"],
            "utterances": self.candidates.texts,
        });
        save_checkpoint(path, &t, &side)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let (t, side) = load_checkpoint(path)?;
        if side["kind"] != "topic" {
            return Err(AgentError::Checkpoint(format!("{} is not a topic agent checkpoint", path.display())));
        }
        let texts: Vec<String> = serde_json::from_value(side["utterances"].clone())
            .map_err(|e| AgentError::Checkpoint(e.to_string()))?;
        let logit_scale = side["logit_scale"].as_f64().unwrap_or(1.0);
        let c: Matrix<f64> = t.matrix("kmeans.centroids")?;
        let centroids = (0..c.rows()).map(|i| c.row(i).to_vec()).collect();
        let t_u = BiEncoder::read_tensors("t_u", &t)?;
        let candidates = CandidateSet::build(texts, &t_u.candidate)?;
        Ok(TopicAgent {
            t_s: TextEncoder::read_tensors("t_s", &t)?,
            kmeans: KMeansModel {
                centroids,
                inertia: t.scalar("kmeans.inertia")?,
                inertia_trace: t.vector("kmeans.trace")?,
            },
            head: TopicHead {
                policy: MlpPolicy::read_tensors("policy", &t)?,
                value: ValueHead::read_tensors("value", &t)?,
                logit_scale,
            },
            t_u,
            candidates,
        })
    }
}

impl RlAgent for TopicAgent {
    type Head = TopicHead;

    fn head(&self) -> &TopicHead {
        &self.head
    }

    fn head_mut(&mut self) -> &mut TopicHead {
        &mut self.head
    }

    fn head_input(&self, obs: &Observation) -> Result<Vec<f64>, AgentError> {
        Ok(self.state(obs))
    }

    fn utterance(&self, obs: &Observation, _s: &Vec<f64>, c: usize) -> String {
        self.topic_utterance(obs, c).to_string()
    }

    fn frozen_checksum(&self) -> u64 {
        let mut p = self.t_s.flat_params();
        p.extend(self.t_u.flat_params());
        p.extend(self.kmeans.centroids.concat());
        param_checksum(&p)
    }
}
