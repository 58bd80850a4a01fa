use std::collections::BTreeMap;
use std::hash::Hasher;

use fnv::FnvHasher;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::NeuralError;
use crate::scalar::{axpy, norm_sq, Scalar};

/// Sparse bag of hashed features with weights summing to one (mean pooling).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureBag {
    pub features: Vec<(u32, f64)>,
}

impl FeatureBag {
    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn buckets(&self) -> impl Iterator<Item = u32> + '_ {
        self.features.iter().map(|&(b, _)| b)
    }
}

fn bucket(key: &str, hash_dim: usize) -> u32 {
    let mut h = FnvHasher::default();
    h.write(key.as_bytes());
    (h.finish() % hash_dim as u64) as u32
}

/// True for separator tokens such as `_self_persona_`. Topic tokens
/// (`_topic_N_`) are features, not separators.
pub fn is_segment_marker(tok: &str) -> bool {
    tok.len() > 2 && tok.starts_with('_') && tok.ends_with('_') && !tok.starts_with("_topic_")
}

/// Hashes unigrams and within-segment bigrams. Every feature is keyed by its
/// segment; the final occurrence of each segment kind is keyed separately so
/// the most recent turn is distinguishable from older history. Each segment
/// contributes the same squared weight, spread evenly over its features, so a
/// bag without repeated features has unit norm.
pub fn featurize<S: AsRef<str>>(tokens: &[S], hash_dim: usize) -> FeatureBag {
    let mut last_pos: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, t) in tokens.iter().enumerate() {
        let t = t.as_ref();
        if is_segment_marker(t) {
            last_pos.insert(t, i);
        }
    }

    // One key list per segment; topic tokens form their own segment.
    let mut segments: Vec<Vec<String>> = Vec::new();
    let mut topic: Vec<String> = Vec::new();
    let mut segment = String::new();
    let mut current: Vec<String> = Vec::new();
    let mut prev: Option<&str> = None;
    for (i, t) in tokens.iter().enumerate() {
        let t = t.as_ref();
        if is_segment_marker(t) {
            segments.push(std::mem::take(&mut current));
            segment = if last_pos.get(t) == Some(&i) { format!("{t}*") } else { t.to_string() };
            prev = None;
            continue;
        }
        if t.starts_with("_topic_") {
            topic.push(format!("topic|{t}"));
            continue;
        }
        current.push(format!("{segment}|{t}"));
        if let Some(p) = prev {
            current.push(format!("{segment}|{p} {t}"));
        }
        prev = Some(t);
    }
    segments.push(current);
    segments.push(topic);
    segments.retain(|s| !s.is_empty());

    let mut weights: BTreeMap<u32, f64> = BTreeMap::new();
    let share = 1.0 / (segments.len().max(1) as f64).sqrt();
    for keys in &segments {
        let w = share / (keys.len() as f64).sqrt();
        for k in keys {
            *weights.entry(bucket(k, hash_dim)).or_insert(0.0) += w;
        }
    }
    FeatureBag { features: weights.into_iter().collect() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub hash_dim: usize,
    pub dim: usize,
    /// Half-width of the uniform embedding initialisation.
    pub init_scale: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig { hash_dim: 1 << 15, dim: 64, init_scale: 1.0 }
    }
}

/// Hashed n-gram embedding bag followed by `W2 tanh(W1 x + b1) + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEncoder<T> {
    pub embedding: Matrix<T>,
    pub w1: Matrix<T>,
    pub b1: Vec<T>,
    pub w2: Matrix<T>,
    pub b2: Vec<T>,
}

pub struct EncoderCache<T> {
    x: Vec<T>,
    h: Vec<T>,
    pub out: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct EncoderGrad<T> {
    pub embedding: BTreeMap<u32, Vec<T>>,
    pub w1: Matrix<T>,
    pub b1: Vec<T>,
    pub w2: Matrix<T>,
    pub b2: Vec<T>,
}

impl<T: Scalar> EncoderGrad<T> {
    pub fn norm_sq(&self) -> T {
        let emb: T = self.embedding.values().map(|r| norm_sq(r)).sum();
        emb + norm_sq(self.w1.as_slice())
            + norm_sq(&self.b1)
            + norm_sq(self.w2.as_slice())
            + norm_sq(&self.b2)
    }

    /// Dense flat layout matching [`TextEncoder::flat_params`].
    pub fn to_flat(&self, hash_dim: usize) -> Vec<T> {
        let d = self.b1.len();
        let mut emb = vec![T::zero(); hash_dim * d];
        for (&b, row) in &self.embedding {
            emb[b as usize * d..(b as usize + 1) * d].copy_from_slice(row);
        }
        let mut out = emb;
        out.extend_from_slice(self.w1.as_slice());
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(self.w2.as_slice());
        out.extend_from_slice(&self.b2);
        out
    }
}

impl<T: Scalar> TextEncoder<T> {
    pub fn new<R: Rng>(cfg: &EncoderConfig, rng: &mut R) -> Self {
        let d = cfg.dim;
        TextEncoder {
            embedding: Matrix::uniform(cfg.hash_dim, d, cfg.init_scale, rng),
            w1: Matrix::glorot(d, d, rng),
            b1: vec![T::zero(); d],
            w2: Matrix::glorot(d, d, rng),
            b2: vec![T::zero(); d],
        }
    }

    pub fn dim(&self) -> usize {
        self.b1.len()
    }

    pub fn hash_dim(&self) -> usize {
        self.embedding.rows()
    }

    pub fn featurize<S: AsRef<str>>(&self, tokens: &[S]) -> FeatureBag {
        featurize(tokens, self.hash_dim())
    }

    pub fn forward(&self, bag: &FeatureBag) -> EncoderCache<T> {
        let mut x = vec![T::zero(); self.dim()];
        for &(b, w) in &bag.features {
            axpy(T::of(w), self.embedding.row(b as usize), &mut x);
        }
        let mut h = self.w1.matvec(&x);
        for (hi, &bi) in h.iter_mut().zip(&self.b1) {
            *hi = (*hi + bi).tanh();
        }
        let mut out = self.w2.matvec(&h);
        for (o, &bi) in out.iter_mut().zip(&self.b2) {
            *o += bi;
        }
        EncoderCache { x, h, out }
    }

    pub fn encode(&self, bag: &FeatureBag) -> Vec<T> {
        self.forward(bag).out
    }

    pub fn encode_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<T> {
        self.encode(&self.featurize(tokens))
    }

    pub fn zero_grad(&self) -> EncoderGrad<T> {
        let d = self.dim();
        EncoderGrad {
            embedding: BTreeMap::new(),
            w1: Matrix::zeros(d, d),
            b1: vec![T::zero(); d],
            w2: Matrix::zeros(d, d),
            b2: vec![T::zero(); d],
        }
    }

    /// Accumulates `∂L/∂θ` into `grad` given `∂L/∂out`.
    pub fn backward(
        &self,
        bag: &FeatureBag,
        cache: &EncoderCache<T>,
        d_out: &[T],
        grad: &mut EncoderGrad<T>,
    ) {
        grad.w2.add_outer(T::one(), d_out, &cache.h);
        axpy(T::one(), d_out, &mut grad.b2);
        let dh = self.w2.matvec_t(d_out);
        let dpre: Vec<T> = dh
            .iter()
            .zip(&cache.h)
            .map(|(&g, &h)| g * (T::one() - h * h))
            .collect();
        grad.w1.add_outer(T::one(), &dpre, &cache.x);
        axpy(T::one(), &dpre, &mut grad.b1);
        let dx = self.w1.matvec_t(&dpre);
        for &(b, w) in &bag.features {
            let row = grad
                .embedding
                .entry(b)
                .or_insert_with(|| vec![T::zero(); dx.len()]);
            axpy(T::of(w), &dx, row);
        }
    }

    /// `θ -= step · g`
    pub fn apply(&mut self, grad: &EncoderGrad<T>, step: T) {
        for (&b, row) in &grad.embedding {
            axpy(-step, row, self.embedding.row_mut(b as usize));
        }
        axpy(-step, grad.w1.as_slice(), self.w1.as_mut_slice());
        axpy(-step, &grad.b1, &mut self.b1);
        axpy(-step, grad.w2.as_slice(), self.w2.as_mut_slice());
        axpy(-step, &grad.b2, &mut self.b2);
    }

    pub fn flat_params(&self) -> Vec<T> {
        let mut out = self.embedding.as_slice().to_vec();
        out.extend_from_slice(self.w1.as_slice());
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(self.w2.as_slice());
        out.extend_from_slice(&self.b2);
        out
    }

    pub fn set_flat_params(&mut self, p: &[T]) -> Result<(), NeuralError> {
        let sizes = [
            self.embedding.as_slice().len(),
            self.w1.as_slice().len(),
            self.b1.len(),
            self.w2.as_slice().len(),
            self.b2.len(),
        ];
        let total: usize = sizes.iter().sum();
        if p.len() != total {
            return Err(NeuralError::DimensionMismatch { expected: total, got: p.len() });
        }
        let mut off = 0;
        for (dst, n) in [
            self.embedding.as_mut_slice(),
            self.w1.as_mut_slice(),
            &mut self.b1[..],
            self.w2.as_mut_slice(),
            &mut self.b2[..],
        ]
        .into_iter()
        .zip(sizes)
        {
            dst.copy_from_slice(&p[off..off + n]);
            off += n;
        }
        Ok(())
    }
}

impl<T: Scalar> TextEncoder<T> {
    pub fn write_tensors(&self, prefix: &str, table: &mut super::TensorTable) {
        use super::Tensor;
        table.insert(format!("{prefix}.embedding"), Tensor::matrix(&self.embedding));
        table.insert(format!("{prefix}.w1"), Tensor::matrix(&self.w1));
        table.insert(format!("{prefix}.b1"), Tensor::vector(&self.b1));
        table.insert(format!("{prefix}.w2"), Tensor::matrix(&self.w2));
        table.insert(format!("{prefix}.b2"), Tensor::vector(&self.b2));
    }

    pub fn read_tensors(prefix: &str, table: &super::TensorTable) -> Result<Self, NeuralError> {
        Ok(TextEncoder {
            embedding: table.matrix(&format!("{prefix}.embedding"))?,
            w1: table.matrix(&format!("{prefix}.w1"))?,
            b1: table.vector(&format!("{prefix}.b1"))?,
            w2: table.matrix(&format!("{prefix}.w2"))?,
            b2: table.vector(&format!("{prefix}.b2"))?,
        })
    }
}
