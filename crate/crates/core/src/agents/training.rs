use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::neural::{argmax, argsort_desc, BiEncoder, FeatureBag, Sgd, TextEncoder};
use crate::scalar::dot;
use crate::task::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 8, batch_size: 32, learning_rate: 0.1, clip_norm: 5.0 }
    }
}

impl TrainConfig {
    pub fn sgd(&self) -> Sgd {
        Sgd { learning_rate: self.learning_rate, clip_norm: self.clip_norm }
    }
}

pub(crate) fn text_bag(enc: &TextEncoder<f64>, text: &str) -> FeatureBag {
    enc.featurize(&tokenize(text))
}

/// Fixed retrieval candidates with their cached embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub texts: Vec<String>,
    pub embeddings: Vec<Vec<f64>>,
}

impl CandidateSet {
    pub fn build(texts: Vec<String>, enc: &TextEncoder<f64>) -> Result<Self, AgentError> {
        if texts.is_empty() {
            return Err(AgentError::EmptyCorpus);
        }
        let embeddings = texts.iter().map(|t| enc.encode(&text_bag(enc, t))).collect();
        Ok(CandidateSet { texts, embeddings })
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }

    pub fn scores(&self, ctx: &[f64]) -> Vec<f64> {
        self.embeddings.iter().map(|v| dot(ctx, v)).collect()
    }

    /// Highest-scoring index, lowest index on ties.
    pub fn best(&self, ctx: &[f64]) -> usize {
        argmax(&self.scores(ctx)).unwrap_or(0)
    }

    pub fn top_k(&self, ctx: &[f64], k: usize) -> Vec<usize> {
        let mut order = argsort_desc(&self.scores(ctx));
        order.truncate(k);
        order
    }
}

/// Shuffled epochs of in-batch-negative steps. A pair whose key already
/// appears in the batch being filled waits for the next batch, so no batch
/// holds the same positive twice. Returns the mean loss of each epoch.
pub fn train_in_batch<R: Rng + ?Sized>(
    bi: &mut BiEncoder<f64>,
    pairs: &[(FeatureBag, FeatureBag, String)],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<Vec<f64>, AgentError> {
    if pairs.len() < 2 {
        return Err(AgentError::EmptyDataset);
    }
    let sgd = cfg.sgd();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        let mut queue: VecDeque<usize> = order.iter().copied().collect();
        let (mut total, mut steps) = (0.0, 0usize);
        while !queue.is_empty() {
            let mut keys = BTreeSet::new();
            let mut batch = Vec::with_capacity(cfg.batch_size);
            let mut deferred = Vec::new();
            while batch.len() < cfg.batch_size {
                let Some(i) = queue.pop_front() else { break };
                if keys.insert(pairs[i].2.as_str()) {
                    batch.push((pairs[i].0.clone(), pairs[i].1.clone()));
                } else {
                    deferred.push(i);
                }
            }
            for i in deferred.into_iter().rev() {
                queue.push_front(i);
            }
            if batch.len() < 2 {
                break;
            }
            total += bi.train_batch(&batch, &sgd)?;
            steps += 1;
        }
        history.push(if steps > 0 { total / steps as f64 } else { 0.0 });
    }
    Ok(history)
}

/// Shuffled epochs of listwise steps, each context against its own list.
pub fn train_listwise<R: Rng + ?Sized>(
    bi: &mut BiEncoder<f64>,
    examples: &[(FeatureBag, Vec<FeatureBag>, usize)],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<Vec<f64>, AgentError> {
    if examples.is_empty() {
        return Err(AgentError::EmptyDataset);
    }
    let sgd = cfg.sgd();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        let (mut total, mut steps) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let batch: Vec<_> = chunk.iter().map(|&i| examples[i].clone()).collect();
            let (loss, grad) = bi.listwise_loss_and_grad(&batch)?;
            bi.apply(&grad, sgd.step_size(grad.norm_sq()));
            total += loss;
            steps += 1;
        }
        history.push(total / steps as f64);
    }
    Ok(history)
}
