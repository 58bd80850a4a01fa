use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NeuralError;
use crate::scalar::{dot, Scalar};

pub fn logsumexp<T: Scalar>(x: &[T]) -> T {
    let m = x.iter().copied().fold(T::neg_infinity(), T::max);
    if m == T::neg_infinity() {
        return m;
    }
    m + x.iter().map(|&v| (v - m).exp()).sum::<T>().ln()
}

pub fn softmax<T: Scalar>(x: &[T]) -> Vec<T> {
    let m = x.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = x.iter().map(|&v| (v - m).exp()).collect();
    let z: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / z).collect()
}

pub fn log_softmax<T: Scalar>(x: &[T]) -> Vec<T> {
    let lse = logsumexp(x);
    x.iter().map(|&v| v - lse).collect()
}

/// Shannon entropy in nats; zero-probability entries contribute nothing.
pub fn entropy<T: Scalar>(p: &[T]) -> T {
    p.iter()
        .filter(|&&v| v > T::zero())
        .map(|&v| -v * v.ln())
        .sum()
}

/// Indices of `scores` in descending order, ties broken by lower index.
pub fn argsort_desc<T: Scalar>(scores: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

/// First index of the maximum.
pub fn argmax<T: Scalar>(scores: &[T]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        match best {
            Some(b) if scores[b] >= s => {}
            _ => best = Some(i),
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate<T> {
    pub candidate_index: usize,
    pub score: T,
    pub prob: T,
}

/// Dot-product scores of `cands` against `ctx`, with softmax probabilities,
/// sorted by descending score (stable on index).
pub fn score_candidates<T: Scalar>(
    ctx: &[T],
    cands: &[Vec<T>],
) -> Result<Vec<ScoredCandidate<T>>, NeuralError> {
    for c in cands {
        if c.len() != ctx.len() {
            return Err(NeuralError::DimensionMismatch { expected: ctx.len(), got: c.len() });
        }
    }
    let scores: Vec<T> = cands.iter().map(|c| dot(ctx, c)).collect();
    let probs = softmax(&scores);
    Ok(argsort_desc(&scores)
        .into_iter()
        .map(|i| ScoredCandidate { candidate_index: i, score: scores[i], prob: probs[i] })
        .collect())
}

/// Inverse-CDF draw from `probs`.
pub fn categorical_sample<T: Scalar, R: Rng + ?Sized>(
    probs: &[T],
    rng: &mut R,
) -> Result<usize, NeuralError> {
    if probs.is_empty() {
        return Err(NeuralError::InvalidDistribution("empty distribution".into()));
    }
    let mut total = 0.0;
    for &p in probs {
        let p = p.f64();
        if !(p >= 0.0) || !p.is_finite() {
            return Err(NeuralError::InvalidDistribution(format!("bad probability {p}")));
        }
        total += p;
    }
    if (total - 1.0).abs() > 1e-6 {
        return Err(NeuralError::InvalidDistribution(format!("probabilities sum to {total}")));
    }
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        let p = p.f64();
        if p > 0.0 {
            last_positive = i;
        }
        acc += p;
        if u < acc && p > 0.0 {
            return Ok(i);
        }
    }
    Ok(last_positive)
}
