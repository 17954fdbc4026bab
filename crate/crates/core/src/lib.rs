//! Goal-driven route navigation with a recurrent actor-critic trained by PPO
//! on fused ego-motion states and visual embeddings.
//!
//! The numeric core (`policynet`, `ppo`) is generic over [`Scalar`]; the
//! aliases below fix the `f32` instantiation used for training and
//! deployment.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod evalharness;
pub mod linalg;
pub mod percept;
pub mod policynet;
pub mod ppo;
pub mod routeworld;
pub mod scalar;
pub mod scenario;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Params = policynet::PolicyParams<f32>;
pub type Params64 = policynet::PolicyParams<f64>;
pub type HiddenState = policynet::Hidden<f32>;
pub type Grads = policynet::Gradients<f32>;
pub type Adam = ppo::AdamState<f32>;
pub type Rollout = ppo::Rollout<f32>;
