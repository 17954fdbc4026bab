//! Recurrent actor-critic: per-channel tanh encoders, one LSTM layer fed with
//! the encodings and the previous action, and linear actor/critic heads read
//! from the LSTM output.

mod action;
mod init;
mod net;

pub use action::{greedy_action, log_softmax, sample_action, ActionSample};
pub use init::{init_params, orthogonal};
pub use net::{backward, forward, forward_step, unroll, Gradients, Hidden, InputGrad, StepBatch, StepCache, StepOutput};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::percept::{GoalModality, GOAL_POSE_DIM, MOTION_DIM};
use crate::routeworld::N_ACTIONS;
use crate::scalar::Scalar;

pub const DEFAULT_ENCODER_UNITS: usize = 512;
pub const DEFAULT_HIDDEN_UNITS: usize = 256;

/// Which observation channels the network consumes. Motion-only and
/// vision-only baselines switch one channel off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelMask {
    pub motion: bool,
    pub visual: bool,
}

impl ChannelMask {
    pub const FULL: ChannelMask = ChannelMask { motion: true, visual: true };
    pub const MOTION_ONLY: ChannelMask = ChannelMask { motion: true, visual: false };
    pub const VISION_ONLY: ChannelMask = ChannelMask { motion: false, visual: true };

    pub fn name(self) -> &'static str {
        match (self.motion, self.visual) {
            (true, true) => "full",
            (true, false) => "motion",
            (false, true) => "vision",
            (false, false) => "none",
        }
    }
}

impl std::str::FromStr for ChannelMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::FULL),
            "motion" => Ok(Self::MOTION_ONLY),
            "vision" => Ok(Self::VISION_ONLY),
            other => Err(Error::InvalidParameter(format!("unknown channel mask {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetDims {
    pub d_motion: usize,
    pub d_visual: usize,
    pub d_goal: usize,
    pub goal_modality: GoalModality,
    pub enc: usize,
    pub hidden: usize,
    pub n_actions: usize,
    pub mask: ChannelMask,
}

impl NetDims {
    /// Dimensions for the standard observation layout: 6-d motion state,
    /// `d_visual` embeddings and the goal described by `goal_modality`.
    pub fn new(d_visual: usize, goal_modality: GoalModality, mask: ChannelMask) -> Self {
        Self {
            d_motion: MOTION_DIM,
            d_visual,
            d_goal: goal_modality.dim(d_visual),
            goal_modality,
            enc: DEFAULT_ENCODER_UNITS,
            hidden: DEFAULT_HIDDEN_UNITS,
            n_actions: N_ACTIONS,
            mask,
        }
    }

    pub fn with_sizes(mut self, enc: usize, hidden: usize) -> Self {
        self.enc = enc;
        self.hidden = hidden;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mask.motion && !self.mask.visual {
            return Err(Error::Shape("at least one observation channel must be on".into()));
        }
        if [self.d_motion, self.d_visual, self.enc, self.hidden, self.n_actions].contains(&0) {
            return Err(Error::Shape(format!("all dimensions must be >= 1: {self:?}")));
        }
        if self.d_goal != self.goal_modality.dim(self.d_visual) {
            return Err(Error::Shape(format!(
                "goal dim {} inconsistent with modality {:?}",
                self.d_goal, self.goal_modality
            )));
        }
        if self.goal_modality.needs_pose() && !self.mask.motion {
            return Err(Error::Shape("pose goals enter through the motion encoder, which is off".into()));
        }
        if self.goal_modality.needs_visual() && !self.mask.visual {
            return Err(Error::Shape("visual goals enter through the visual encoder, which is off".into()));
        }
        Ok(())
    }

    /// Motion encoder input: motion state followed by the goal pose (if any).
    pub fn motion_in(&self) -> usize {
        self.d_motion + if self.goal_modality.needs_pose() { GOAL_POSE_DIM } else { 0 }
    }

    /// Visual encoder input: embedding followed by the goal embedding (if any).
    pub fn visual_in(&self) -> usize {
        self.d_visual + if self.goal_modality.needs_visual() { self.d_visual } else { 0 }
    }

    /// LSTM input width: active encodings plus the one-hot previous action.
    pub fn lstm_in(&self) -> usize {
        let channels = self.mask.motion as usize + self.mask.visual as usize;
        channels * self.enc + self.n_actions
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    /// `out × in`
    pub w: Mat<T>,
    /// `1 × out`
    pub b: Mat<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn zeros(out: usize, inp: usize) -> Self {
        Self { w: Mat::zeros(out, inp), b: Mat::zeros(1, out) }
    }
}

/// All learnable tensors. The same layout doubles as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams<T> {
    pub dims: NetDims,
    pub motion_enc: Option<Linear<T>>,
    pub visual_enc: Option<Linear<T>>,
    /// Input-to-gate weights, `4H × lstm_in`, gate blocks ordered i, f, g, o.
    pub lstm_wx: Mat<T>,
    /// Recurrent weights, `4H × H`.
    pub lstm_wh: Mat<T>,
    pub lstm_b: Mat<T>,
    pub actor: Linear<T>,
    pub critic: Linear<T>,
}

impl<T: Scalar> PolicyParams<T> {
    pub fn zeros(dims: NetDims) -> Result<Self> {
        dims.validate()?;
        let h = dims.hidden;
        Ok(Self {
            dims,
            motion_enc: dims.mask.motion.then(|| Linear::zeros(dims.enc, dims.motion_in())),
            visual_enc: dims.mask.visual.then(|| Linear::zeros(dims.enc, dims.visual_in())),
            lstm_wx: Mat::zeros(4 * h, dims.lstm_in()),
            lstm_wh: Mat::zeros(4 * h, h),
            lstm_b: Mat::zeros(1, 4 * h),
            actor: Linear::zeros(dims.n_actions, h),
            critic: Linear::zeros(1, h),
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dims).expect("dims already validated")
    }

    /// Named tensors in a fixed order.
    pub fn tensors(&self) -> Vec<(&'static str, &Mat<T>)> {
        let mut out = Vec::with_capacity(11);
        if let Some(l) = &self.motion_enc {
            out.push(("motion_enc.w", &l.w));
            out.push(("motion_enc.b", &l.b));
        }
        if let Some(l) = &self.visual_enc {
            out.push(("visual_enc.w", &l.w));
            out.push(("visual_enc.b", &l.b));
        }
        out.push(("lstm.wx", &self.lstm_wx));
        out.push(("lstm.wh", &self.lstm_wh));
        out.push(("lstm.b", &self.lstm_b));
        out.push(("actor.w", &self.actor.w));
        out.push(("actor.b", &self.actor.b));
        out.push(("critic.w", &self.critic.w));
        out.push(("critic.b", &self.critic.b));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Mat<T>)> {
        let mut out = Vec::with_capacity(11);
        if let Some(l) = &mut self.motion_enc {
            out.push(("motion_enc.w", &mut l.w));
            out.push(("motion_enc.b", &mut l.b));
        }
        if let Some(l) = &mut self.visual_enc {
            out.push(("visual_enc.w", &mut l.w));
            out.push(("visual_enc.b", &mut l.b));
        }
        out.push(("lstm.wx", &mut self.lstm_wx));
        out.push(("lstm.wh", &mut self.lstm_wh));
        out.push(("lstm.b", &mut self.lstm_b));
        out.push(("actor.w", &mut self.actor.w));
        out.push(("actor.b", &mut self.actor.b));
        out.push(("critic.w", &mut self.critic.w));
        out.push(("critic.b", &mut self.critic.b));
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.data.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, m)| m.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> PolicyParams<U> {
        let lin = |l: &Linear<T>| Linear { w: l.w.cast(), b: l.b.cast() };
        PolicyParams {
            dims: self.dims,
            motion_enc: self.motion_enc.as_ref().map(lin),
            visual_enc: self.visual_enc.as_ref().map(lin),
            lstm_wx: self.lstm_wx.cast(),
            lstm_wh: self.lstm_wh.cast(),
            lstm_b: self.lstm_b.cast(),
            actor: lin(&self.actor),
            critic: lin(&self.critic),
        }
    }

    /// Euclidean norm over every tensor.
    pub fn global_norm(&self) -> T {
        self.tensors()
            .iter()
            .flat_map(|(_, m)| m.data.iter())
            .map(|&v| v * v)
            .sum::<T>()
            .sqrt()
    }

    pub fn scale(&mut self, k: T) {
        for (_, m) in self.tensors_mut() {
            m.data.iter_mut().for_each(|v| *v *= k);
        }
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &Self) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.data.iter_mut().zip(&b.data).for_each(|(x, y)| *x += *y);
        }
    }
}
