use rand::Rng;

use super::curriculum::CurriculumState;
use super::curve::{EpisodeRecord, LearningCurve};
use super::PpoConfig;
use crate::error::{Error, Result};
use crate::policynet::{forward_step, sample_action, ActionSample, Hidden, NetDims, PolicyParams, StepBatch};
use crate::routeworld::{Action, NavEnv, Observation};
use crate::scalar::Scalar;

/// Anything that can drive rollout collection.
pub trait RolloutPolicy<T: Scalar> {
    fn dims(&self) -> &NetDims;

    /// Samples one action per row and returns the value estimates and the
    /// next recurrent state.
    fn act<R: Rng + ?Sized>(
        &self,
        input: &StepBatch<T>,
        state: &Hidden<T>,
        rng: &mut R,
    ) -> Result<(Vec<ActionSample<T>>, Vec<T>, Hidden<T>)>;

    fn value(&self, input: &StepBatch<T>, state: &Hidden<T>) -> Result<Vec<T>>;
}

impl<T: Scalar> RolloutPolicy<T> for PolicyParams<T> {
    fn dims(&self) -> &NetDims {
        &self.dims
    }

    fn act<R: Rng + ?Sized>(
        &self,
        input: &StepBatch<T>,
        state: &Hidden<T>,
        rng: &mut R,
    ) -> Result<(Vec<ActionSample<T>>, Vec<T>, Hidden<T>)> {
        let (out, next, _) = forward_step(self, input, state)?;
        let samples = (0..input.batch())
            .map(|r| sample_action(out.logits.row(r), rng))
            .collect::<Result<Vec<_>>>()?;
        Ok((samples, out.value, next))
    }

    fn value(&self, input: &StepBatch<T>, state: &Hidden<T>) -> Result<Vec<T>> {
        Ok(forward_step(self, input, state)?.0.value)
    }
}

/// Uniform random actions with zero value; a baseline and test stub.
#[derive(Debug, Clone)]
pub struct UniformPolicy {
    pub dims: NetDims,
}

impl<T: Scalar> RolloutPolicy<T> for UniformPolicy {
    fn dims(&self) -> &NetDims {
        &self.dims
    }

    fn act<R: Rng + ?Sized>(
        &self,
        input: &StepBatch<T>,
        _state: &Hidden<T>,
        rng: &mut R,
    ) -> Result<(Vec<ActionSample<T>>, Vec<T>, Hidden<T>)> {
        let logits = vec![T::zero(); self.dims.n_actions];
        let samples = (0..input.batch()).map(|_| sample_action(&logits, rng)).collect::<Result<Vec<_>>>()?;
        Ok((samples, vec![T::zero(); input.batch()], Hidden::zeros(input.batch(), self.dims.hidden)))
    }

    fn value(&self, input: &StepBatch<T>, _state: &Hidden<T>) -> Result<Vec<T>> {
        Ok(vec![T::zero(); input.batch()])
    }
}

/// Experience from `n_envs` environments over `len` steps; indexed `[t][env]`.
#[derive(Debug, Clone)]
pub struct Rollout<T> {
    pub inputs: Vec<StepBatch<T>>,
    pub actions: Vec<Vec<usize>>,
    pub log_probs: Vec<Vec<T>>,
    pub values: Vec<Vec<T>>,
    pub rewards: Vec<Vec<T>>,
    pub dones: Vec<Vec<bool>>,
    /// True where the step is the first of an episode (state zeroed before it).
    pub episode_start: Vec<Vec<bool>>,
    /// Recurrent state at the start of each chunk, all envs.
    pub chunk_init: Vec<Hidden<T>>,
    /// Value of the observation following the last step.
    pub bootstrap: Vec<T>,
    pub chunk_len: usize,
}

impl<T: Scalar> Rollout<T> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn n_envs(&self) -> usize {
        self.bootstrap.len()
    }

    /// Per-env column of a `[t][env]` table.
    pub fn column<V: Copy>(table: &[Vec<V>], env: usize) -> Vec<V> {
        table.iter().map(|row| row[env]).collect()
    }
}

/// Steps a set of environments with a policy, resetting finished episodes in
/// place from the curriculum and recording the learning curve.
pub struct Collector<T> {
    envs: Vec<NavEnv>,
    obs: Vec<Observation>,
    hidden: Hidden<T>,
    starting: Vec<bool>,
    ep_return: Vec<f64>,
    ep_steps: Vec<usize>,
    pub curriculum: CurriculumState,
    pub curve: LearningCurve,
    /// Finished episodes, including any beyond the recording limit.
    pub episodes: usize,
    record_limit: usize,
}

impl<T: Scalar> Collector<T> {
    pub fn new<R: Rng + ?Sized>(
        mut envs: Vec<NavEnv>,
        curriculum: CurriculumState,
        hidden_size: usize,
        record_limit: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if envs.is_empty() {
            return Err(Error::InvalidParameter("collector needs at least one env".into()));
        }
        let level = curriculum.current();
        let obs = envs.iter_mut().map(|e| e.reset(level, rng)).collect::<Result<Vec<_>>>()?;
        let n = envs.len();
        Ok(Self {
            envs,
            obs,
            hidden: Hidden::zeros(n, hidden_size),
            starting: vec![true; n],
            ep_return: vec![0.0; n],
            ep_steps: vec![0; n],
            curriculum,
            curve: LearningCurve::default(),
            episodes: 0,
            record_limit,
        })
    }

    pub fn n_envs(&self) -> usize {
        self.envs.len()
    }

    pub fn collect<P, R>(
        &mut self,
        policy: &P,
        cfg: &PpoConfig,
        rng: &mut R,
        on_episode: &mut dyn FnMut(&EpisodeRecord) -> Result<()>,
    ) -> Result<Rollout<T>>
    where
        P: RolloutPolicy<T>,
        R: Rng + ?Sized,
    {
        let n = self.envs.len();
        let len = cfg.rollout_len;
        let dims = *policy.dims();
        let mut ro = Rollout {
            inputs: Vec::with_capacity(len),
            actions: Vec::with_capacity(len),
            log_probs: Vec::with_capacity(len),
            values: Vec::with_capacity(len),
            rewards: Vec::with_capacity(len),
            dones: Vec::with_capacity(len),
            episode_start: Vec::with_capacity(len),
            chunk_init: Vec::with_capacity(len / cfg.chunk_len + 1),
            bootstrap: Vec::new(),
            chunk_len: cfg.chunk_len,
        };
        for t in 0..len {
            if t % cfg.chunk_len == 0 {
                ro.chunk_init.push(self.hidden.clone());
            }
            let refs: Vec<&Observation> = self.obs.iter().collect();
            let input = StepBatch::from_observations(&dims, &refs)?;
            let (samples, values, mut next) = policy.act(&input, &self.hidden, rng)?;

            let mut rewards = Vec::with_capacity(n);
            let mut dones = Vec::with_capacity(n);
            let starts = self.starting.clone();
            for e in 0..n {
                let action = Action::from_index(samples[e].action)?;
                let res = self.envs[e].step(action)?;
                self.ep_return[e] += res.reward as f64;
                self.ep_steps[e] += 1;
                rewards.push(T::from_f32(res.reward).expect("reward fits scalar"));
                dones.push(res.done);
                if res.done {
                    let record = EpisodeRecord {
                        episode: self.episodes,
                        level: self.curriculum.level,
                        success: res.info.reached_goal,
                        ret: self.ep_return[e],
                        steps: self.ep_steps[e],
                    };
                    if self.episodes < self.record_limit {
                        self.curve.push(record);
                        on_episode(&record)?;
                    }
                    self.episodes += 1;
                    self.curriculum.advance(res.info.reached_goal);
                    self.ep_return[e] = 0.0;
                    self.ep_steps[e] = 0;
                    self.obs[e] = self.envs[e].reset(self.curriculum.current(), rng)?;
                    next.reset_row(e);
                    self.starting[e] = true;
                } else {
                    self.obs[e] = res.observation;
                    self.starting[e] = false;
                }
            }
            ro.inputs.push(input);
            ro.actions.push(samples.iter().map(|s| s.action).collect());
            ro.log_probs.push(samples.iter().map(|s| s.log_prob).collect());
            ro.values.push(values);
            ro.rewards.push(rewards);
            ro.dones.push(dones);
            ro.episode_start.push(starts);
            self.hidden = next;
        }
        let refs: Vec<&Observation> = self.obs.iter().collect();
        let input = StepBatch::from_observations(&dims, &refs)?;
        ro.bootstrap = policy.value(&input, &self.hidden)?;
        Ok(ro)
    }
}
