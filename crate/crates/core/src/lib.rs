//! Goal-directed dialogue agents in a small text-adventure world.
//!
//! The numeric core in [`neural`] is generic over [`scalar::Scalar`]
//! (`f32` or `f64`). Agents, RL training and evaluation run on `f64`; the
//! aliases below name the `f64` instantiations they use.

pub mod config;
pub mod eval;
pub mod neural;
pub mod pipeline;
pub mod rng;
pub mod scalar;
pub mod task;
pub mod world;
pub mod agents;
pub mod rl;

pub use scalar::Scalar;

pub type Matrix = neural::Matrix<f64>;
pub type TextEncoder = neural::TextEncoder<f64>;
pub type BiEncoder = neural::BiEncoder<f64>;
pub type MlpPolicy = neural::MlpPolicy<f64>;
pub type ValueHead = neural::ValueHead<f64>;
pub type KMeansModel = neural::KMeansModel<f64>;

pub type Matrix32 = neural::Matrix<f32>;
pub type TextEncoder32 = neural::TextEncoder<f32>;
pub type BiEncoder32 = neural::BiEncoder<f32>;
pub type MlpPolicy32 = neural::MlpPolicy<f32>;
pub type ValueHead32 = neural::ValueHead<f32>;
pub type KMeansModel32 = neural::KMeansModel<f32>;
