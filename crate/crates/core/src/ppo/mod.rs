//! Recurrent PPO: rollout collection, advantage estimation, the clipped
//! surrogate loss, Adam and the goal-distance curriculum.

mod adam;
mod curriculum;
mod curve;
mod gae;
mod loss;
mod rollout;
mod train;

pub use adam::{adam_step, clip_global_norm, AdamState};
pub use curriculum::{CurriculumConfig, CurriculumState};
pub use curve::{CurveWriter, EpisodeRecord, LearningCurve, CURVE_HEADER};
pub use gae::compute_gae;
pub use loss::{normalize_advantages, ppo_loss, LossBatch, LossOutput, LossStats};
pub use rollout::{Collector, RolloutPolicy, Rollout, UniformPolicy};
pub use train::{train, NoHooks, Progress, TrainHooks, TrainOutcome};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub rollout_len: usize,
    pub n_envs: usize,
    pub epochs: usize,
    pub chunk_len: usize,
    /// Minibatches per epoch; chunks are split evenly between them.
    pub minibatches: usize,
    pub grad_clip_norm: f64,
    pub total_episodes: usize,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.01,
            lr: 2.5e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-5,
            rollout_len: 128,
            n_envs: 8,
            epochs: 4,
            chunk_len: 16,
            minibatches: 4,
            grad_clip_norm: 0.5,
            total_episodes: 10_000,
            seed: 0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !unit(self.gamma) || !unit(self.gae_lambda) {
            return Err(Error::InvalidParameter("gamma and gae_lambda must lie in [0, 1]".into()));
        }
        if !(self.clip > 0.0 && self.clip.is_finite()) {
            return Err(Error::InvalidParameter("clip must be positive".into()));
        }
        if ![self.value_coef, self.entropy_coef, self.lr, self.adam_eps, self.grad_clip_norm]
            .into_iter()
            .all(nonneg)
            || !unit(self.adam_beta1)
            || !unit(self.adam_beta2)
        {
            return Err(Error::InvalidParameter("PPO coefficients must be non-negative".into()));
        }
        if self.rollout_len == 0 || self.n_envs == 0 || self.chunk_len == 0 || self.minibatches == 0 {
            return Err(Error::InvalidParameter("rollout_len, n_envs, chunk_len, minibatches must be >= 1".into()));
        }
        if self.rollout_len % self.chunk_len != 0 {
            return Err(Error::InvalidParameter("rollout_len must be a multiple of chunk_len".into()));
        }
        let chunks = self.n_envs * self.rollout_len / self.chunk_len;
        if self.minibatches > chunks {
            return Err(Error::InvalidParameter(format!(
                "{} minibatches but only {chunks} chunks per rollout",
                self.minibatches
            )));
        }
        Ok(())
    }
}
