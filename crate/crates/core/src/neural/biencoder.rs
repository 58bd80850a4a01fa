use rand::Rng;

use super::encoder::{EncoderConfig, EncoderGrad, FeatureBag, TextEncoder};
use super::softmax::{argmax, log_softmax, softmax};
use super::{NeuralError, Sgd};
use crate::scalar::{axpy, dot, Scalar};

/// Separate context and candidate encoders scored by dot product.
#[derive(Debug, Clone, PartialEq)]
pub struct BiEncoder<T> {
    pub context: TextEncoder<T>,
    pub candidate: TextEncoder<T>,
}

#[derive(Debug, Clone)]
pub struct BiEncoderGrad<T> {
    pub context: EncoderGrad<T>,
    pub candidate: EncoderGrad<T>,
}

impl<T: Scalar> BiEncoderGrad<T> {
    pub fn norm_sq(&self) -> T {
        self.context.norm_sq() + self.candidate.norm_sq()
    }
}

impl<T: Scalar> BiEncoder<T> {
    pub fn new<R: Rng>(cfg: &EncoderConfig, rng: &mut R) -> Self {
        BiEncoder {
            context: TextEncoder::new(cfg, rng),
            candidate: TextEncoder::new(cfg, rng),
        }
    }

    pub fn encode_context(&self, bag: &FeatureBag) -> Vec<T> {
        self.context.encode(bag)
    }

    pub fn encode_candidate(&self, bag: &FeatureBag) -> Vec<T> {
        self.candidate.encode(bag)
    }

    /// Mean in-batch-negative cross-entropy and its gradient.
    pub fn loss_and_grad(
        &self,
        batch: &[(FeatureBag, FeatureBag)],
    ) -> Result<(T, BiEncoderGrad<T>), NeuralError> {
        let b = batch.len();
        if b < 2 {
            return Err(NeuralError::BatchTooSmall(b));
        }
        let ctx: Vec<_> = batch.iter().map(|(c, _)| self.context.forward(c)).collect();
        let cand: Vec<_> = batch.iter().map(|(_, v)| self.candidate.forward(v)).collect();
        let d = self.context.dim();
        let inv_b = T::one() / T::of(b as f64);

        let mut loss = T::zero();
        let mut d_ctx = vec![vec![T::zero(); d]; b];
        let mut d_cand = vec![vec![T::zero(); d]; b];
        for i in 0..b {
            let scores: Vec<T> = cand.iter().map(|v| dot(&ctx[i].out, &v.out)).collect();
            loss -= log_softmax(&scores)[i] * inv_b;
            let mut g = softmax(&scores);
            g[i] -= T::one();
            for (j, gj) in g.into_iter().enumerate() {
                let gj = gj * inv_b;
                axpy(gj, &cand[j].out, &mut d_ctx[i]);
                axpy(gj, &ctx[i].out, &mut d_cand[j]);
            }
        }

        let mut grad = BiEncoderGrad {
            context: self.context.zero_grad(),
            candidate: self.candidate.zero_grad(),
        };
        for i in 0..b {
            self.context.backward(&batch[i].0, &ctx[i], &d_ctx[i], &mut grad.context);
            self.candidate.backward(&batch[i].1, &cand[i], &d_cand[i], &mut grad.candidate);
        }
        Ok((loss, grad))
    }

    /// Mean cross-entropy where each context ranks its own candidate list;
    /// `target` indexes the positive within that list.
    pub fn listwise_loss_and_grad(
        &self,
        batch: &[(FeatureBag, Vec<FeatureBag>, usize)],
    ) -> Result<(T, BiEncoderGrad<T>), NeuralError> {
        if batch.is_empty() {
            return Err(NeuralError::BatchTooSmall(0));
        }
        let inv_b = T::one() / T::of(batch.len() as f64);
        let mut loss = T::zero();
        let mut grad = BiEncoderGrad {
            context: self.context.zero_grad(),
            candidate: self.candidate.zero_grad(),
        };
        for (ctx_bag, cands, target) in batch {
            if *target >= cands.len() {
                return Err(NeuralError::DimensionMismatch { expected: cands.len(), got: *target });
            }
            let ctx = self.context.forward(ctx_bag);
            let cand: Vec<_> = cands.iter().map(|v| self.candidate.forward(v)).collect();
            let scores: Vec<T> = cand.iter().map(|v| dot(&ctx.out, &v.out)).collect();
            loss -= log_softmax(&scores)[*target] * inv_b;
            let mut g = softmax(&scores);
            g[*target] -= T::one();
            let mut d_ctx = vec![T::zero(); ctx.out.len()];
            for (j, gj) in g.into_iter().enumerate() {
                let gj = gj * inv_b;
                axpy(gj, &cand[j].out, &mut d_ctx);
                let d_cand: Vec<T> = ctx.out.iter().map(|&c| c * gj).collect();
                self.candidate.backward(&cands[j], &cand[j], &d_cand, &mut grad.candidate);
            }
            self.context.backward(ctx_bag, &ctx, &d_ctx, &mut grad.context);
        }
        Ok((loss, grad))
    }

    pub fn apply(&mut self, grad: &BiEncoderGrad<T>, step: T) {
        self.context.apply(&grad.context, step);
        self.candidate.apply(&grad.candidate, step);
    }

    /// One clipped SGD step on a batch; returns the pre-step loss.
    pub fn train_batch(
        &mut self,
        batch: &[(FeatureBag, FeatureBag)],
        sgd: &Sgd,
    ) -> Result<T, NeuralError> {
        let (loss, grad) = self.loss_and_grad(batch)?;
        let step = sgd.step_size(grad.norm_sq());
        self.apply(&grad, step);
        Ok(loss)
    }

    /// Fraction of contexts whose own candidate scores highest among `pairs`.
    pub fn recall_at_1(&self, pairs: &[(FeatureBag, FeatureBag)]) -> f64 {
        if pairs.is_empty() {
            return 0.0;
        }
        let cands: Vec<Vec<T>> = pairs.iter().map(|(_, v)| self.encode_candidate(v)).collect();
        let hits = pairs
            .iter()
            .enumerate()
            .filter(|(i, (c, _))| {
                let ctx = self.encode_context(c);
                let scores: Vec<T> = cands.iter().map(|v| dot(&ctx, v)).collect();
                argmax(&scores) == Some(*i)
            })
            .count();
        hits as f64 / pairs.len() as f64
    }

    pub fn flat_params(&self) -> Vec<T> {
        let mut p = self.context.flat_params();
        p.extend(self.candidate.flat_params());
        p
    }
}

impl<T: Scalar> BiEncoder<T> {
    pub fn write_tensors(&self, prefix: &str, table: &mut super::TensorTable) {
        self.context.write_tensors(&format!("{prefix}.context"), table);
        self.candidate.write_tensors(&format!("{prefix}.candidate"), table);
    }

    pub fn read_tensors(prefix: &str, table: &super::TensorTable) -> Result<Self, NeuralError> {
        Ok(BiEncoder {
            context: TextEncoder::read_tensors(&format!("{prefix}.context"), table)?,
            candidate: TextEncoder::read_tensors(&format!("{prefix}.candidate"), table)?,
        })
    }
}
