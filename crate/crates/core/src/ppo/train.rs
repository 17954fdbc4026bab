use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, clip_global_norm, AdamState};
use super::curriculum::{CurriculumConfig, CurriculumState};
use super::curve::{EpisodeRecord, LearningCurve};
use super::gae::compute_gae;
use super::loss::{normalize_advantages, ppo_loss, LossBatch, LossStats};
use super::rollout::{Collector, Rollout};
use super::PpoConfig;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::policynet::{backward, init_params, unroll, Hidden, NetDims, PolicyParams, StepBatch};
use crate::scalar::Scalar;
use crate::scenario::{Perturbation, Scenario};

/// Observers for a training run. All methods default to no-ops.
pub trait TrainHooks<T> {
    fn on_episode(&mut self, _record: &EpisodeRecord) -> Result<()> {
        Ok(())
    }

    /// Called after every optimizer update.
    fn on_update(&mut self, _params: &PolicyParams<T>, _progress: &Progress) -> Result<()> {
        Ok(())
    }

    /// Called with the offending parameters before a run aborts on a
    /// numerical failure.
    fn on_failure(&mut self, _params: &PolicyParams<T>, _progress: &Progress, _error: &Error) {}
}

/// Run state passed to [`TrainHooks`].
#[derive(Debug, Clone, PartialEq)]
pub struct Progress {
    /// Finished episodes, capped at the budget.
    pub episodes: usize,
    pub updates: usize,
    pub level: usize,
    pub stats: LossStats,
    pub rng_digest: String,
}

pub struct NoHooks;

impl<T> TrainHooks<T> for NoHooks {}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: PolicyParams<T>,
    pub curve: LearningCurve,
    pub episodes: usize,
    pub final_level: usize,
    pub max_level: usize,
    pub updates: usize,
    /// Identifies the final state of the run's random stream.
    pub rng_digest: String,
}

pub(crate) fn rng_digest(rng: &ChaCha8Rng) -> String {
    let seed: String = rng.get_seed().iter().map(|b| format!("{b:02x}")).collect();
    format!("chacha8:{seed}:{}", rng.get_word_pos())
}

/// Trains a policy on `scenario` until `cfg.total_episodes` episodes have
/// finished. Fully deterministic for a fixed seed.
pub fn train<T: Scalar, H: TrainHooks<T>>(
    scenario: &Scenario,
    dims: NetDims,
    cfg: &PpoConfig,
    curriculum: &CurriculumConfig,
    hooks: &mut H,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    dims.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params: PolicyParams<T> = init_params(dims, &mut rng)?;
    let curriculum = CurriculumState::new(curriculum, scenario.graph.diameter())?;
    let max_level = curriculum.max_level();
    if cfg.total_episodes == 0 {
        return Ok(TrainOutcome {
            params,
            curve: LearningCurve::default(),
            episodes: 0,
            final_level: 1,
            max_level,
            updates: 0,
            rng_digest: rng_digest(&rng),
        });
    }

    let sensors = scenario.sensors(&Perturbation::none())?.sensors;
    let envs = scenario.make_envs(cfg.n_envs, &sensors)?;
    let mut collector = Collector::<T>::new(envs, curriculum, dims.hidden, cfg.total_episodes, &mut rng)?;
    let mut adam = AdamState::new(&params);
    let mut updates = 0;

    while collector.episodes < cfg.total_episodes {
        let rollout = collector.collect(&params, cfg, &mut rng, &mut |r| hooks.on_episode(r))?;
        let result = update(&mut params, &mut adam, &rollout, cfg, &mut rng);
        let mut progress = Progress {
            episodes: collector.episodes.min(cfg.total_episodes),
            updates,
            level: collector.curriculum.level,
            stats: LossStats::default(),
            rng_digest: rng_digest(&rng),
        };
        match result {
            Ok(stats) => {
                updates += 1;
                log::debug!(
                    "update {updates}: episodes {} level {} pi {:.4} v {:.4} H {:.3} kl {:.4} clip {:.3}",
                    collector.episodes,
                    collector.curriculum.level,
                    stats.policy_loss,
                    stats.value_loss,
                    stats.entropy,
                    stats.approx_kl,
                    stats.clip_fraction
                );
                progress.updates = updates;
                progress.stats = stats;
                hooks.on_update(&params, &progress)?;
            }
            Err(e) => {
                hooks.on_failure(&params, &progress, &e);
                return Err(e);
            }
        }
    }

    Ok(TrainOutcome {
        params,
        curve: collector.curve,
        episodes: cfg.total_episodes,
        final_level: collector.curriculum.level,
        max_level,
        updates,
        rng_digest: rng_digest(&rng),
    })
}

/// `epochs` passes of minibatched truncated-BPTT updates over one rollout.
pub(crate) fn update<T: Scalar>(
    params: &mut PolicyParams<T>,
    adam: &mut AdamState<T>,
    ro: &Rollout<T>,
    cfg: &PpoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<LossStats> {
    let n_envs = ro.n_envs();
    let len = ro.len();
    let cl = ro.chunk_len;
    let (gamma, lambda) = (T::lit(cfg.gamma), T::lit(cfg.gae_lambda));

    // [t][env] tables of advantages and returns.
    let mut adv = vec![vec![T::zero(); n_envs]; len];
    let mut ret = vec![vec![T::zero(); n_envs]; len];
    for e in 0..n_envs {
        let (a, r) = compute_gae(
            &Rollout::<T>::column(&ro.rewards, e),
            &Rollout::<T>::column(&ro.values, e),
            &Rollout::<T>::column(&ro.dones, e),
            ro.bootstrap[e],
            gamma,
            lambda,
        )?;
        for t in 0..len {
            adv[t][e] = a[t];
            ret[t][e] = r[t];
        }
    }

    let mut chunks: Vec<(usize, usize)> = (0..n_envs).flat_map(|e| (0..len / cl).map(move |c| (e, c))).collect();
    let mut last = LossStats::default();
    for _ in 0..cfg.epochs {
        chunks.shuffle(rng);
        let per = chunks.len().div_ceil(cfg.minibatches);
        for mb in chunks.chunks(per) {
            let b = mb.len();
            let inputs: Vec<StepBatch<T>> = (0..cl)
                .map(|k| {
                    let parts: Vec<(&StepBatch<T>, usize)> = mb.iter().map(|&(e, c)| (&ro.inputs[c * cl + k], e)).collect();
                    StepBatch::gather(&parts)
                })
                .collect();
            let starts: Vec<Vec<bool>> =
                (0..cl).map(|k| mb.iter().map(|&(e, c)| ro.episode_start[c * cl + k][e]).collect()).collect();
            let initial = Hidden::stack(&mb.iter().map(|&(e, c)| ro.chunk_init[c].row(e)).collect::<Vec<_>>());

            let (outs, caches) = unroll(params, &inputs, &initial, &starts)?;

            let n = cl * b;
            let mut logits = Mat::zeros(n, params.dims.n_actions);
            let mut values = Vec::with_capacity(n);
            let mut batch = LossBatch {
                actions: Vec::with_capacity(n),
                old_log_probs: Vec::with_capacity(n),
                advantages: Vec::with_capacity(n),
                returns: Vec::with_capacity(n),
            };
            for (k, out) in outs.iter().enumerate() {
                for (r, &(e, c)) in mb.iter().enumerate() {
                    let t = c * cl + k;
                    logits.row_mut(k * b + r).copy_from_slice(out.logits.row(r));
                    values.push(out.value[r]);
                    batch.actions.push(ro.actions[t][e]);
                    batch.old_log_probs.push(ro.log_probs[t][e]);
                    batch.advantages.push(adv[t][e]);
                    batch.returns.push(ret[t][e]);
                }
            }
            normalize_advantages(&mut batch.advantages);
            let loss = ppo_loss(&logits, &values, &batch, cfg)?;

            let dlogits: Vec<Mat<T>> = (0..cl)
                .map(|k| Mat::from_vec(b, logits.cols, loss.dlogits.data[k * b * logits.cols..(k + 1) * b * logits.cols].to_vec()))
                .collect();
            let dvalues: Vec<Vec<T>> = (0..cl).map(|k| loss.dvalues[k * b..(k + 1) * b].to_vec()).collect();
            let mut grads = backward(params, &caches, &dlogits, &dvalues)?.params;
            let norm = clip_global_norm(&mut grads, cfg.grad_clip_norm);
            if !norm.is_finite() {
                return Err(Error::Numerical(format!("non-finite gradient norm {norm}")));
            }
            adam_step(params, &grads, adam, cfg);
            last = loss.stats;
        }
    }
    if !params.is_finite() {
        return Err(Error::Numerical("parameters became non-finite".into()));
    }
    Ok(last)
}
