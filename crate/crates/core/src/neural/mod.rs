//! Small trainable components with hand-written gradients: a hashed n-gram
//! text encoder, dot-product bi-encoders trained with in-batch negatives, a
//! two-layer tanh policy MLP with a linear value head, and k-means.
//!
//! Everything is generic over [`Scalar`](crate::scalar::Scalar). Forward
//! passes take `&self`; only the explicit `apply`/`train_*` methods mutate.

mod biencoder;
mod checkpoint;
mod encoder;
mod kmeans;
mod matrix;
mod mlp;
mod softmax;

use std::hash::Hasher;

use fnv::FnvHasher;
use thiserror::Error;

use crate::scalar::Scalar;

pub use biencoder::{BiEncoder, BiEncoderGrad};
pub use checkpoint::{
    load_checkpoint, read_tensors, save_checkpoint, write_tensors, Tensor, TensorTable,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use encoder::{
    featurize, is_segment_marker, EncoderCache, EncoderConfig, EncoderGrad, FeatureBag,
    TextEncoder,
};
pub use kmeans::{kmeans_fit, KMeansModel};
pub use matrix::Matrix;
pub use mlp::{MlpCache, MlpGrad, MlpPolicy, ValueHead};
pub use softmax::{
    argmax, argsort_desc, categorical_sample, entropy, log_softmax, logsumexp, score_candidates,
    softmax, ScoredCandidate,
};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("batch of {0} has no negatives")]
    BatchTooSmall(usize),
    #[error("{points} points cannot form {clusters} clusters")]
    TooFewPoints { points: usize, clusters: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Plain SGD with global gradient-norm clipping.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Sgd {
    pub learning_rate: f64,
    pub clip_norm: f64,
}

impl Default for Sgd {
    fn default() -> Self {
        Sgd { learning_rate: 0.1, clip_norm: 1.0 }
    }
}

impl Sgd {
    /// Step multiplier for a gradient with squared norm `norm_sq`.
    pub fn step_size<T: Scalar>(&self, norm_sq: T) -> T {
        let norm = norm_sq.f64().sqrt();
        let clip = if self.clip_norm > 0.0 && norm > self.clip_norm {
            self.clip_norm / norm
        } else {
            1.0
        };
        T::of(self.learning_rate * clip)
    }
}

/// Order-sensitive FNV digest of the exact bit patterns of `params`.
pub fn param_checksum<T: Scalar>(params: &[T]) -> u64 {
    let mut h = FnvHasher::default();
    for p in params {
        h.write_u64(p.f64().to_bits());
    }
    h.finish()
}
