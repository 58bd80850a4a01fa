use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use super::EvalError;

/// Exact one-sided sign test on paired binary outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub n: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    /// Pairs where only `a` succeeded.
    pub a_only: usize,
    /// Pairs where only `b` succeeded.
    pub b_only: usize,
    /// `P(X ≥ a_only)` for `X ~ Bin(a_only + b_only, 1/2)`.
    pub p_value: f64,
}

/// Tests whether `a` succeeds more often than `b` on the same episodes.
pub fn paired_sign_test(a: &[u8], b: &[u8]) -> Result<PairedTest, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::Unpaired(a.len(), b.len()));
    }
    let n = a.len();
    let a_only = a.iter().zip(b).filter(|(x, y)| **x == 1 && **y == 0).count();
    let b_only = a.iter().zip(b).filter(|(x, y)| **x == 0 && **y == 1).count();
    let discordant = (a_only + b_only) as u64;
    let p_value = if a_only == 0 {
        1.0
    } else {
        Binomial::new(0.5, discordant).expect("valid binomial").sf(a_only as u64 - 1)
    };
    let mean = |v: &[u8]| if n == 0 { 0.0 } else { v.iter().map(|&x| x as f64).sum::<f64>() / n as f64 };
    Ok(PairedTest { n, mean_a: mean(a), mean_b: mean(b), a_only, b_only, p_value })
}
