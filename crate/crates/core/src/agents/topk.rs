use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::inverse::InverseModel;
use super::{ActMode, AgentError};
use crate::neural::{
    load_checkpoint, save_checkpoint, softmax, Matrix, Tensor, TensorTable, ValueHead,
};
use crate::rl::{decide, PolicyHead, RlAgent};
use crate::scalar::{axpy, dot, norm_sq};
use crate::task::Observation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopKVariant {
    /// `t_i = (A s̃ + b)·v_i`
    Linear,
    /// Final-layer attention of a two-layer attention net over `{s̃, v_1..v_K}`.
    Attention,
}

/// Inverse-model state and its `K` best candidates for one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct TopKInput {
    pub s: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    /// Corpus index of each candidate.
    pub idx: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead {
    pub a: Matrix<f64>,
    pub b: Vec<f64>,
    pub value: ValueHead<f64>,
}

impl LinearHead {
    /// `A = I`, `b = 0`: the policy starts out ranking like the inverse model.
    pub fn identity(d: usize) -> Self {
        LinearHead { a: Matrix::identity(d), b: vec![0.0; d], value: ValueHead::zeros(d) }
    }

    fn query(&self, s: &[f64]) -> Vec<f64> {
        let mut q = self.a.matvec(s);
        axpy(1.0, &self.b, &mut q);
        q
    }
}

/// Two attention layers over the token set `X = [s̃; v_1; …; v_K]`.
///
/// Layer 1: `H = X + softmax(X Wq1ᵀ (X Wk1ᵀ)ᵀ / √d) X Wv1ᵀ`.
/// Layer 2: the distribution is `softmax_i((Wq2 h_0)·(Wk2 h_i))`, i ≥ 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionHead {
    pub wq1: Matrix<f64>,
    pub wk1: Matrix<f64>,
    pub wv1: Matrix<f64>,
    pub wq2: Matrix<f64>,
    pub wk2: Matrix<f64>,
    pub value: ValueHead<f64>,
}

struct AttnCache {
    x: Vec<Vec<f64>>,
    q1: Vec<Vec<f64>>,
    k1: Vec<Vec<f64>>,
    v1: Vec<Vec<f64>>,
    a1: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
    q2: Vec<f64>,
    k2: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

impl AttentionHead {
    /// Layer 1 passes tokens through unchanged (`Wv1 = 0`) and layer 2
    /// starts at `Wq2 = Wk2 = I`, matching the inverse-model ranking.
    pub fn new<R: Rng>(d: usize, init_scale: f64, rng: &mut R) -> Self {
        AttentionHead {
            wq1: Matrix::uniform(d, d, init_scale, rng),
            wk1: Matrix::uniform(d, d, init_scale, rng),
            wv1: Matrix::zeros(d, d),
            wq2: Matrix::identity(d),
            wk2: Matrix::identity(d),
            value: ValueHead::zeros(d),
        }
    }

    fn forward(&self, x: &TopKInput) -> AttnCache {
        let mut xs = vec![x.s.clone()];
        xs.extend(x.v.iter().cloned());
        let d = x.s.len();
        let scale = 1.0 / (d as f64).sqrt();
        let q1: Vec<Vec<f64>> = xs.iter().map(|r| self.wq1.matvec(r)).collect();
        let k1: Vec<Vec<f64>> = xs.iter().map(|r| self.wk1.matvec(r)).collect();
        let v1: Vec<Vec<f64>> = xs.iter().map(|r| self.wv1.matvec(r)).collect();
        let a1: Vec<Vec<f64>> = q1
            .iter()
            .map(|q| softmax(&k1.iter().map(|k| dot(q, k) * scale).collect::<Vec<_>>()))
            .collect();
        let h: Vec<Vec<f64>> = xs
            .iter()
            .zip(&a1)
            .map(|(xr, ar)| {
                let mut hr = xr.clone();
                for (j, &w) in ar.iter().enumerate() {
                    axpy(w, &v1[j], &mut hr);
                }
                hr
            })
            .collect();
        let q2 = self.wq2.matvec(&h[0]);
        let k2: Vec<Vec<f64>> = h[1..].iter().map(|r| self.wk2.matvec(r)).collect();
        let logits = k2.iter().map(|k| dot(&q2, k)).collect();
        AttnCache { x: xs, q1, k1, v1, a1, h, q2, k2, logits }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopKHead {
    Linear(LinearHead),
    Attention(AttentionHead),
}

pub enum TopKGrad {
    Linear { a: Matrix<f64>, b: Vec<f64>, vw: Vec<f64>, vb: f64 },
    Attention { w: [Matrix<f64>; 5], vw: Vec<f64>, vb: f64 },
}

impl TopKHead {
    pub fn variant(&self) -> TopKVariant {
        match self {
            TopKHead::Linear(_) => TopKVariant::Linear,
            TopKHead::Attention(_) => TopKVariant::Attention,
        }
    }

    fn value_head(&self) -> &ValueHead<f64> {
        match self {
            TopKHead::Linear(h) => &h.value,
            TopKHead::Attention(h) => &h.value,
        }
    }

    fn value_head_mut(&mut self) -> &mut ValueHead<f64> {
        match self {
            TopKHead::Linear(h) => &mut h.value,
            TopKHead::Attention(h) => &mut h.value,
        }
    }

    fn matrices(&self) -> Vec<&Matrix<f64>> {
        match self {
            TopKHead::Linear(h) => vec![&h.a],
            TopKHead::Attention(h) => vec![&h.wq1, &h.wk1, &h.wv1, &h.wq2, &h.wk2],
        }
    }

    fn matrices_mut(&mut self) -> Vec<&mut Matrix<f64>> {
        match self {
            TopKHead::Linear(h) => vec![&mut h.a],
            TopKHead::Attention(h) => vec![&mut h.wq1, &mut h.wk1, &mut h.wv1, &mut h.wq2, &mut h.wk2],
        }
    }
}

fn attention_backward(h: &AttentionHead, c: &AttnCache, d_logits: &[f64], w: &mut [Matrix<f64>; 5]) {
    let n = c.x.len();
    let d = c.q2.len();
    let scale = 1.0 / (d as f64).sqrt();
    // Layer 2.
    let mut d_q2 = vec![0.0; d];
    let mut d_h = vec![vec![0.0; d]; n];
    for (i, &g) in d_logits.iter().enumerate() {
        axpy(g, &c.k2[i], &mut d_q2);
        let d_k: Vec<f64> = c.q2.iter().map(|q| q * g).collect();
        w[4].add_outer(1.0, &d_k, &c.h[i + 1]);
        axpy(1.0, &h.wk2.matvec_t(&d_k), &mut d_h[i + 1]);
    }
    w[3].add_outer(1.0, &d_q2, &c.h[0]);
    axpy(1.0, &h.wq2.matvec_t(&d_q2), &mut d_h[0]);
    // Layer 1: the residual path carries into X, which is not trainable.
    let mut d_v1 = vec![vec![0.0; d]; n];
    let mut d_q1 = vec![vec![0.0; d]; n];
    let mut d_k1 = vec![vec![0.0; d]; n];
    for r in 0..n {
        let d_a: Vec<f64> = (0..n).map(|j| dot(&d_h[r], &c.v1[j])).collect();
        for j in 0..n {
            axpy(c.a1[r][j], &d_h[r], &mut d_v1[j]);
        }
        let inner = dot(&c.a1[r], &d_a);
        for j in 0..n {
            let ds = c.a1[r][j] * (d_a[j] - inner) * scale;
            axpy(ds, &c.k1[j], &mut d_q1[r]);
            axpy(ds, &c.q1[r], &mut d_k1[j]);
        }
    }
    for r in 0..n {
        w[0].add_outer(1.0, &d_q1[r], &c.x[r]);
        w[1].add_outer(1.0, &d_k1[r], &c.x[r]);
        w[2].add_outer(1.0, &d_v1[r], &c.x[r]);
    }
}

impl PolicyHead for TopKHead {
    type Input = TopKInput;
    type Grad = TopKGrad;

    fn logits(&self, x: &TopKInput) -> Vec<f64> {
        match self {
            TopKHead::Linear(h) => {
                let q = h.query(&x.s);
                x.v.iter().map(|v| dot(&q, v)).collect()
            }
            TopKHead::Attention(h) => h.forward(x).logits,
        }
    }

    fn value(&self, x: &TopKInput) -> f64 {
        self.value_head().forward(&x.s)
    }

    fn zero_grad(&self) -> TopKGrad {
        let d = self.value_head().w.len();
        let z = || Matrix::zeros(d, d);
        match self {
            TopKHead::Linear(_) => TopKGrad::Linear { a: z(), b: vec![0.0; d], vw: vec![0.0; d], vb: 0.0 },
            TopKHead::Attention(_) => TopKGrad::Attention { w: [z(), z(), z(), z(), z()], vw: vec![0.0; d], vb: 0.0 },
        }
    }

    fn accumulate(&self, x: &TopKInput, d_logits: &[f64], d_value: f64, grad: &mut TopKGrad) {
        let (gw, gb) = self.value_head().grad(&x.s, d_value);
        match (self, grad) {
            (TopKHead::Linear(_), TopKGrad::Linear { a, b, vw, vb }) => {
                let mut d_q = vec![0.0; x.s.len()];
                for (g, v) in d_logits.iter().zip(&x.v) {
                    axpy(*g, v, &mut d_q);
                }
                a.add_outer(1.0, &d_q, &x.s);
                axpy(1.0, &d_q, b);
                axpy(1.0, &gw, vw);
                *vb += gb;
            }
            (TopKHead::Attention(h), TopKGrad::Attention { w, vw, vb }) => {
                attention_backward(h, &h.forward(x), d_logits, w);
                axpy(1.0, &gw, vw);
                *vb += gb;
            }
            _ => unreachable!("gradient variant matches head variant"),
        }
    }

    fn grad_norm_sq(g: &TopKGrad) -> f64 {
        match g {
            TopKGrad::Linear { a, b, vw, vb } => norm_sq(a.as_slice()) + norm_sq(b) + norm_sq(vw) + vb * vb,
            TopKGrad::Attention { w, vw, vb } => {
                w.iter().map(|m| norm_sq(m.as_slice())).sum::<f64>() + norm_sq(vw) + vb * vb
            }
        }
    }

    fn grad_flat(g: &TopKGrad) -> Vec<f64> {
        let mut out = Vec::new();
        match g {
            TopKGrad::Linear { a, b, vw, vb } => {
                out.extend_from_slice(a.as_slice());
                out.extend_from_slice(b);
                out.extend_from_slice(vw);
                out.push(*vb);
            }
            TopKGrad::Attention { w, vw, vb } => {
                for m in w {
                    out.extend_from_slice(m.as_slice());
                }
                out.extend_from_slice(vw);
                out.push(*vb);
            }
        }
        out
    }

    fn apply(&mut self, g: &TopKGrad, step: f64) {
        match (&mut *self, g) {
            (TopKHead::Linear(h), TopKGrad::Linear { a, b, .. }) => {
                axpy(-step, a.as_slice(), h.a.as_mut_slice());
                axpy(-step, b, &mut h.b);
            }
            (TopKHead::Attention(_), TopKGrad::Attention { w, .. }) => {
                for (m, gm) in self.matrices_mut().into_iter().zip(w) {
                    axpy(-step, gm.as_slice(), m.as_mut_slice());
                }
            }
            _ => unreachable!("gradient variant matches head variant"),
        }
        let (vw, vb) = match g {
            TopKGrad::Linear { vw, vb, .. } | TopKGrad::Attention { vw, vb, .. } => (vw, *vb),
        };
        self.value_head_mut().apply(vw, vb, step);
    }

    fn params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for m in self.matrices() {
            out.extend_from_slice(m.as_slice());
        }
        if let TopKHead::Linear(h) = self {
            out.extend_from_slice(&h.b);
        }
        out.extend(self.value_head().flat_params());
        out
    }

    fn set_params(&mut self, p: &[f64]) {
        let mut off = 0;
        for m in self.matrices_mut() {
            let n = m.as_slice().len();
            m.as_mut_slice().copy_from_slice(&p[off..off + n]);
            off += n;
        }
        if let TopKHead::Linear(h) = self {
            let n = h.b.len();
            h.b.copy_from_slice(&p[off..off + n]);
            off += n;
        }
        let v = self.value_head_mut();
        let n = v.w.len();
        v.w.copy_from_slice(&p[off..off + n]);
        v.b = p[off + n];
    }
}

/// Re-ranks the inverse model's `K` best utterances.
#[derive(Debug, Clone, PartialEq)]
pub struct TopKAgent {
    pub inverse: InverseModel,
    pub k: usize,
    pub head: TopKHead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopKAct {
    pub utterance: String,
    pub index: usize,
    pub logprob: f64,
    pub value: f64,
}

impl TopKAgent {
    pub fn new<R: Rng>(inverse: InverseModel, k: usize, variant: TopKVariant, rng: &mut R) -> Result<Self, AgentError> {
        if k < 2 || inverse.candidates.len() < k {
            return Err(AgentError::CorpusTooSmall { need: k.max(2), have: inverse.candidates.len() });
        }
        let d = inverse.bi.context.dim();
        let head = match variant {
            TopKVariant::Linear => TopKHead::Linear(LinearHead::identity(d)),
            TopKVariant::Attention => TopKHead::Attention(AttentionHead::new(d, 0.05, rng)),
        };
        Ok(TopKAgent { inverse, k, head })
    }

    pub fn topk_act<R: Rng + ?Sized>(&self, obs: &Observation, mode: ActMode, rng: &mut R) -> Result<TopKAct, AgentError> {
        let d = decide(self, obs, mode, rng)?;
        Ok(TopKAct { utterance: d.utterance, index: d.action, logprob: d.logprob, value: d.value })
    }

    pub fn save(&self, path: &Path) -> Result<(), AgentError> {
        let mut t = TensorTable::default();
        self.inverse.write("inverse", &mut t);
        match &self.head {
            TopKHead::Linear(h) => {
                t.insert("head.a", Tensor::matrix(&h.a));
                t.insert("head.b", Tensor::vector(&h.b));
            }
            TopKHead::Attention(h) => {
                for (name, m) in ["wq1", "wk1", "wv1", "wq2", "wk2"].iter().zip([&h.wq1, &h.wk1, &h.wv1, &h.wq2, &h.wk2]) {
                    t.insert(format!("head.{name}"), Tensor::matrix(m));
                }
            }
        }
        self.head.value_head().write_tensors("value", &mut t);
        let side = serde_json::json!({
            "kind": match self.head.variant() { TopKVariant::Linear => "topkbi", TopKVariant::Attention => "topk" },
            "k": self.k,
            "goal_conditioned": self.inverse.goal_conditioned,
            "frozen": ["inverse"],
            "trainable": ["head", "value"],
            "utterances": self.inverse.candidates.texts,
        });
        save_checkpoint(path, &t, &side)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let (t, side) = load_checkpoint(path)?;
        let kind = side["kind"].as_str().unwrap_or("");
        if kind != "topk" && kind != "topkbi" {
            return Err(AgentError::Checkpoint(format!("{} is not a top-k agent checkpoint", path.display())));
        }
        let texts: Vec<String> = serde_json::from_value(side["utterances"].clone())
            .map_err(|e| AgentError::Checkpoint(e.to_string()))?;
        let inverse = InverseModel::read("inverse", &t, side["goal_conditioned"].as_bool().unwrap_or(true), texts)?;
        let value = ValueHead::read_tensors("value", &t)?;
        let head = if kind == "topkbi" {
            TopKHead::Linear(LinearHead { a: t.matrix("head.a")?, b: t.vector("head.b")?, value })
        } else {
            TopKHead::Attention(AttentionHead {
                wq1: t.matrix("head.wq1")?,
                wk1: t.matrix("head.wk1")?,
                wv1: t.matrix("head.wv1")?,
                wq2: t.matrix("head.wq2")?,
                wk2: t.matrix("head.wk2")?,
                value,
            })
        };
        let k = side["k"].as_u64().unwrap_or(0) as usize;
        Ok(TopKAgent { inverse, k, head })
    }
}

impl RlAgent for TopKAgent {
    type Head = TopKHead;

    fn head(&self) -> &TopKHead {
        &self.head
    }

    fn head_mut(&mut self) -> &mut TopKHead {
        &mut self.head
    }

    fn head_input(&self, obs: &Observation) -> Result<TopKInput, AgentError> {
        let s = self.inverse.embed(obs);
        let idx = self.inverse.candidates.top_k(&s, self.k);
        if idx.len() < self.k {
            return Err(AgentError::CorpusTooSmall { need: self.k, have: idx.len() });
        }
        let v = idx.iter().map(|&i| self.inverse.candidates.embeddings[i].clone()).collect();
        Ok(TopKInput { s, v, idx })
    }

    fn utterance(&self, _obs: &Observation, x: &TopKInput, i: usize) -> String {
        self.inverse.candidates.texts[x.idx[i]].clone()
    }

    fn frozen_checksum(&self) -> u64 {
        self.inverse.checksum()
    }
}
