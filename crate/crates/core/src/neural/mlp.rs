use rand::Rng;

use super::matrix::Matrix;
use super::NeuralError;
use crate::scalar::{axpy, dot, norm_sq, Scalar};

/// `tanh(W2 tanh(W1 s + b1) + b2)`, one output per topic.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpPolicy<T> {
    pub w1: Matrix<T>,
    pub b1: Vec<T>,
    pub w2: Matrix<T>,
    pub b2: Vec<T>,
}

pub struct MlpCache<T> {
    h1: Vec<T>,
    pub out: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct MlpGrad<T> {
    pub w1: Matrix<T>,
    pub b1: Vec<T>,
    pub w2: Matrix<T>,
    pub b2: Vec<T>,
}

impl<T: Scalar> MlpGrad<T> {
    pub fn norm_sq(&self) -> T {
        norm_sq(self.w1.as_slice())
            + norm_sq(&self.b1)
            + norm_sq(self.w2.as_slice())
            + norm_sq(&self.b2)
    }

    pub fn to_flat(&self) -> Vec<T> {
        let mut v = self.w1.as_slice().to_vec();
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(self.w2.as_slice());
        v.extend_from_slice(&self.b2);
        v
    }
}

impl<T: Scalar> MlpPolicy<T> {
    pub fn zeros(input: usize, hidden: usize, outputs: usize) -> Self {
        MlpPolicy {
            w1: Matrix::zeros(hidden, input),
            b1: vec![T::zero(); hidden],
            w2: Matrix::zeros(outputs, hidden),
            b2: vec![T::zero(); outputs],
        }
    }

    /// Weights uniform in `[-scale, scale]`, biases zero.
    pub fn uniform<R: Rng>(input: usize, hidden: usize, outputs: usize, scale: f64, rng: &mut R) -> Self {
        MlpPolicy {
            w1: Matrix::uniform(hidden, input, scale, rng),
            b1: vec![T::zero(); hidden],
            w2: Matrix::uniform(outputs, hidden, scale, rng),
            b2: vec![T::zero(); outputs],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn outputs(&self) -> usize {
        self.b2.len()
    }

    pub fn forward_cached(&self, s: &[T]) -> Result<MlpCache<T>, NeuralError> {
        if s.len() != self.input_dim() {
            return Err(NeuralError::DimensionMismatch { expected: self.input_dim(), got: s.len() });
        }
        let mut h1 = self.w1.matvec(s);
        for (h, &b) in h1.iter_mut().zip(&self.b1) {
            *h = (*h + b).tanh();
        }
        let mut out = self.w2.matvec(&h1);
        for (o, &b) in out.iter_mut().zip(&self.b2) {
            *o = (*o + b).tanh();
        }
        Ok(MlpCache { h1, out })
    }

    pub fn forward(&self, s: &[T]) -> Result<Vec<T>, NeuralError> {
        Ok(self.forward_cached(s)?.out)
    }

    pub fn zero_grad(&self) -> MlpGrad<T> {
        MlpGrad {
            w1: Matrix::zeros(self.w1.rows(), self.w1.cols()),
            b1: vec![T::zero(); self.b1.len()],
            w2: Matrix::zeros(self.w2.rows(), self.w2.cols()),
            b2: vec![T::zero(); self.b2.len()],
        }
    }

    /// Accumulates `∂L/∂θ` given `∂L/∂out`.
    pub fn backward(&self, s: &[T], cache: &MlpCache<T>, d_out: &[T], grad: &mut MlpGrad<T>) {
        let d_pre2: Vec<T> = d_out
            .iter()
            .zip(&cache.out)
            .map(|(&g, &o)| g * (T::one() - o * o))
            .collect();
        grad.w2.add_outer(T::one(), &d_pre2, &cache.h1);
        axpy(T::one(), &d_pre2, &mut grad.b2);
        let dh1 = self.w2.matvec_t(&d_pre2);
        let d_pre1: Vec<T> = dh1
            .iter()
            .zip(&cache.h1)
            .map(|(&g, &h)| g * (T::one() - h * h))
            .collect();
        grad.w1.add_outer(T::one(), &d_pre1, s);
        axpy(T::one(), &d_pre1, &mut grad.b1);
    }

    pub fn apply(&mut self, grad: &MlpGrad<T>, step: T) {
        axpy(-step, grad.w1.as_slice(), self.w1.as_mut_slice());
        axpy(-step, &grad.b1, &mut self.b1);
        axpy(-step, grad.w2.as_slice(), self.w2.as_mut_slice());
        axpy(-step, &grad.b2, &mut self.b2);
    }

    pub fn flat_params(&self) -> Vec<T> {
        let mut v = self.w1.as_slice().to_vec();
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(self.w2.as_slice());
        v.extend_from_slice(&self.b2);
        v
    }

    pub fn set_flat_params(&mut self, p: &[T]) -> Result<(), NeuralError> {
        let n = [self.w1.as_slice().len(), self.b1.len(), self.w2.as_slice().len(), self.b2.len()];
        let total: usize = n.iter().sum();
        if p.len() != total {
            return Err(NeuralError::DimensionMismatch { expected: total, got: p.len() });
        }
        let (a, rest) = p.split_at(n[0]);
        let (b, rest) = rest.split_at(n[1]);
        let (c, d) = rest.split_at(n[2]);
        self.w1.as_mut_slice().copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w2.as_mut_slice().copy_from_slice(c);
        self.b2.copy_from_slice(d);
        Ok(())
    }
}

/// State-value estimate `w·s + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueHead<T> {
    pub w: Vec<T>,
    pub b: T,
}

impl<T: Scalar> ValueHead<T> {
    pub fn zeros(dim: usize) -> Self {
        ValueHead { w: vec![T::zero(); dim], b: T::zero() }
    }

    pub fn forward(&self, s: &[T]) -> T {
        dot(&self.w, s) + self.b
    }

    /// `(∂L/∂w, ∂L/∂b)` given `∂L/∂v`.
    pub fn grad(&self, s: &[T], d_v: T) -> (Vec<T>, T) {
        (s.iter().map(|&x| x * d_v).collect(), d_v)
    }

    pub fn apply(&mut self, gw: &[T], gb: T, step: T) {
        axpy(-step, gw, &mut self.w);
        self.b -= step * gb;
    }

    pub fn flat_params(&self) -> Vec<T> {
        let mut v = self.w.clone();
        v.push(self.b);
        v
    }
}

impl<T: Scalar> MlpPolicy<T> {
    pub fn write_tensors(&self, prefix: &str, table: &mut super::TensorTable) {
        use super::Tensor;
        table.insert(format!("{prefix}.w1"), Tensor::matrix(&self.w1));
        table.insert(format!("{prefix}.b1"), Tensor::vector(&self.b1));
        table.insert(format!("{prefix}.w2"), Tensor::matrix(&self.w2));
        table.insert(format!("{prefix}.b2"), Tensor::vector(&self.b2));
    }

    pub fn read_tensors(prefix: &str, table: &super::TensorTable) -> Result<Self, NeuralError> {
        Ok(MlpPolicy {
            w1: table.matrix(&format!("{prefix}.w1"))?,
            b1: table.vector(&format!("{prefix}.b1"))?,
            w2: table.matrix(&format!("{prefix}.w2"))?,
            b2: table.vector(&format!("{prefix}.b2"))?,
        })
    }
}

impl<T: Scalar> ValueHead<T> {
    pub fn write_tensors(&self, prefix: &str, table: &mut super::TensorTable) {
        table.insert(format!("{prefix}.w"), super::Tensor::vector(&self.w));
        table.insert(format!("{prefix}.b"), super::Tensor::scalar(self.b));
    }

    pub fn read_tensors(prefix: &str, table: &super::TensorTable) -> Result<Self, NeuralError> {
        Ok(ValueHead {
            w: table.vector(&format!("{prefix}.w"))?,
            b: table.scalar(&format!("{prefix}.b"))?,
        })
    }
}
