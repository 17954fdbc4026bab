//! Batched forward pass with activation caches and exact truncated-BPTT
//! gradients.

use super::{Linear, NetDims, PolicyParams};
use crate::error::{Error, Result};
use crate::linalg::{add_col_sums, add_dy_w, add_dyt_x, add_xwt, affine, Mat};
use crate::percept::GOAL_POSE_DIM;
use crate::routeworld::Observation;
use crate::scalar::Scalar;

/// Network input for `B` parallel sequences at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepBatch<T> {
    /// `B × motion_in`, present iff the motion channel is on.
    pub motion: Option<Mat<T>>,
    /// `B × visual_in`, present iff the visual channel is on.
    pub visual: Option<Mat<T>>,
    /// Previous action per row, `None` on the first step of an episode.
    pub prev_action: Vec<Option<usize>>,
}

impl<T: Scalar> StepBatch<T> {
    pub fn batch(&self) -> usize {
        self.prev_action.len()
    }

    /// Assembles encoder inputs from observations. Channels the network does
    /// not consume are never read.
    pub fn from_observations(dims: &NetDims, obs: &[&Observation]) -> Result<Self> {
        let b = obs.len();
        let goal_visual = dims.goal_modality.needs_visual();
        let goal_pose = dims.goal_modality.needs_pose();
        let cast = |v: f32| T::from_f32(v).expect("f32 converts to scalar");

        let motion = if dims.mask.motion {
            let mut m = Mat::zeros(b, dims.motion_in());
            for (r, o) in obs.iter().enumerate() {
                if o.goal.len() != dims.d_goal {
                    return Err(Error::Shape(format!("goal has {} values, expected {}", o.goal.len(), dims.d_goal)));
                }
                let row = m.row_mut(r);
                let motion = o.motion.as_slice();
                if motion.len() != dims.d_motion {
                    return Err(Error::Shape("motion state dimension mismatch".into()));
                }
                for (d, s) in row.iter_mut().zip(motion) {
                    *d = cast(*s);
                }
                if goal_pose {
                    let pose = &o.goal[o.goal.len() - GOAL_POSE_DIM..];
                    for (d, s) in row[dims.d_motion..].iter_mut().zip(pose) {
                        *d = cast(*s);
                    }
                }
            }
            Some(m)
        } else {
            None
        };

        let visual = if dims.mask.visual {
            let mut m = Mat::zeros(b, dims.visual_in());
            for (r, o) in obs.iter().enumerate() {
                let x = o.visual.as_ref().ok_or(Error::MissingChannel("visual observation"))?;
                if x.len() != dims.d_visual {
                    return Err(Error::Shape(format!(
                        "visual observation has {} values, expected {}",
                        x.len(),
                        dims.d_visual
                    )));
                }
                if o.goal.len() != dims.d_goal {
                    return Err(Error::Shape(format!("goal has {} values, expected {}", o.goal.len(), dims.d_goal)));
                }
                let row = m.row_mut(r);
                for (d, s) in row.iter_mut().zip(x) {
                    *d = cast(*s);
                }
                if goal_visual {
                    for (d, s) in row[dims.d_visual..].iter_mut().zip(&o.goal[..dims.d_visual]) {
                        *d = cast(*s);
                    }
                }
            }
            Some(m)
        } else {
            None
        };

        Ok(Self { motion, visual, prev_action: obs.iter().map(|o| o.prev_action_index()).collect() })
    }

    /// Stacks selected rows of several batches into one batch.
    pub fn gather(parts: &[(&StepBatch<T>, usize)]) -> Self {
        let pick = |get: &dyn Fn(&StepBatch<T>) -> Option<&Mat<T>>| -> Option<Mat<T>> {
            let first = get(parts.first()?.0)?;
            let mut m = Mat::zeros(parts.len(), first.cols);
            for (r, (b, row)) in parts.iter().enumerate() {
                m.row_mut(r).copy_from_slice(get(b).expect("uniform channels").row(*row));
            }
            Some(m)
        };
        Self {
            motion: pick(&|b| b.motion.as_ref()),
            visual: pick(&|b| b.visual.as_ref()),
            prev_action: parts.iter().map(|(b, row)| b.prev_action[*row]).collect(),
        }
    }

    fn check(&self, dims: &NetDims) -> Result<()> {
        let b = self.batch();
        let ok = |m: &Option<Mat<T>>, on: bool, cols: usize| match m {
            Some(m) => on && m.rows == b && m.cols == cols,
            None => !on,
        };
        if !ok(&self.motion, dims.mask.motion, dims.motion_in()) {
            return Err(Error::Shape("motion input does not match network dims".into()));
        }
        if !ok(&self.visual, dims.mask.visual, dims.visual_in()) {
            return Err(Error::Shape("visual input does not match network dims".into()));
        }
        if self.prev_action.iter().flatten().any(|&a| a >= dims.n_actions) {
            return Err(Error::Shape("previous action out of range".into()));
        }
        Ok(())
    }
}

/// LSTM state for `B` sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct Hidden<T> {
    pub h: Mat<T>,
    pub c: Mat<T>,
}

impl<T: Scalar> Hidden<T> {
    pub fn zeros(batch: usize, hidden: usize) -> Self {
        Self { h: Mat::zeros(batch, hidden), c: Mat::zeros(batch, hidden) }
    }

    pub fn reset_row(&mut self, r: usize) {
        self.h.row_mut(r).fill(T::zero());
        self.c.row_mut(r).fill(T::zero());
    }

    pub fn row(&self, r: usize) -> Hidden<T> {
        Hidden {
            h: Mat::from_vec(1, self.h.cols, self.h.row(r).to_vec()),
            c: Mat::from_vec(1, self.c.cols, self.c.row(r).to_vec()),
        }
    }

    pub fn stack(rows: &[Hidden<T>]) -> Hidden<T> {
        let cols = rows.first().map_or(0, |h| h.h.cols);
        let mut out = Hidden::zeros(rows.len(), cols);
        for (r, s) in rows.iter().enumerate() {
            out.h.row_mut(r).copy_from_slice(&s.h.data);
            out.c.row_mut(r).copy_from_slice(&s.c.data);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput<T> {
    /// `B × n_actions`
    pub logits: Mat<T>,
    pub value: Vec<T>,
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub struct StepCache<T> {
    input: StepBatch<T>,
    zm: Option<Mat<T>>,
    zv: Option<Mat<T>>,
    u: Mat<T>,
    h_prev: Mat<T>,
    c_prev: Mat<T>,
    /// `B × 4H` post-activation gates i, f, g, o.
    gates: Mat<T>,
    tanh_c: Mat<T>,
    h: Mat<T>,
    /// Rows whose state was zeroed before this step.
    reset: Vec<bool>,
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn encode<T: Scalar>(lin: &Linear<T>, x: &Mat<T>) -> Mat<T> {
    let mut z = Mat::zeros(0, 0);
    affine(x, &lin.w, &lin.b, &mut z);
    z.data.iter_mut().for_each(|v| *v = v.tanh());
    z
}

/// One step for a batch. The incoming state is used as given.
pub fn forward_step<T: Scalar>(
    params: &PolicyParams<T>,
    input: &StepBatch<T>,
    state: &Hidden<T>,
) -> Result<(StepOutput<T>, Hidden<T>, StepCache<T>)> {
    forward_step_masked(params, input, state, vec![false; input.batch()])
}

fn forward_step_masked<T: Scalar>(
    params: &PolicyParams<T>,
    input: &StepBatch<T>,
    state: &Hidden<T>,
    reset: Vec<bool>,
) -> Result<(StepOutput<T>, Hidden<T>, StepCache<T>)> {
    let dims = &params.dims;
    input.check(dims)?;
    let b = input.batch();
    let hd = dims.hidden;
    if state.h.rows != b || state.h.cols != hd || state.c.rows != b || state.c.cols != hd {
        return Err(Error::Shape("hidden state does not match batch/hidden size".into()));
    }

    let zm = match (&params.motion_enc, &input.motion) {
        (Some(l), Some(x)) => Some(encode(l, x)),
        _ => None,
    };
    let zv = match (&params.visual_enc, &input.visual) {
        (Some(l), Some(x)) => Some(encode(l, x)),
        _ => None,
    };

    let mut u = Mat::zeros(b, dims.lstm_in());
    for r in 0..b {
        let row = u.row_mut(r);
        let mut off = 0;
        for z in [&zm, &zv].into_iter().flatten() {
            row[off..off + dims.enc].copy_from_slice(z.row(r));
            off += dims.enc;
        }
        if let Some(a) = input.prev_action[r] {
            row[off + a] = T::one();
        }
    }

    let mut h_prev = state.h.clone();
    let mut c_prev = state.c.clone();
    for (r, &z) in reset.iter().enumerate() {
        if z {
            h_prev.row_mut(r).fill(T::zero());
            c_prev.row_mut(r).fill(T::zero());
        }
    }

    let mut gates = Mat::zeros(0, 0);
    affine(&u, &params.lstm_wx, &params.lstm_b, &mut gates);
    add_xwt(&h_prev, &params.lstm_wh, T::one(), &mut gates);

    let mut c = Mat::zeros(b, hd);
    let mut tanh_c = Mat::zeros(b, hd);
    let mut h = Mat::zeros(b, hd);
    for r in 0..b {
        let g = gates.row_mut(r);
        for j in 0..hd {
            g[j] = sigmoid(g[j]);
            g[hd + j] = sigmoid(g[hd + j]);
            g[2 * hd + j] = g[2 * hd + j].tanh();
            g[3 * hd + j] = sigmoid(g[3 * hd + j]);
        }
        let g = gates.row(r);
        let cp = c_prev.row(r);
        for j in 0..hd {
            let cj = g[hd + j] * cp[j] + g[j] * g[2 * hd + j];
            let tc = cj.tanh();
            c.data[r * hd + j] = cj;
            tanh_c.data[r * hd + j] = tc;
            h.data[r * hd + j] = g[3 * hd + j] * tc;
        }
    }

    let mut logits = Mat::zeros(0, 0);
    affine(&h, &params.actor.w, &params.actor.b, &mut logits);
    let mut value = Mat::zeros(0, 0);
    affine(&h, &params.critic.w, &params.critic.b, &mut value);

    let next = Hidden { h: h.clone(), c: c.clone() };
    let cache = StepCache { input: input.clone(), zm, zv, u, h_prev, c_prev, gates, tanh_c, h, reset };
    Ok((StepOutput { logits, value: value.data }, next, cache))
}

/// Single-observation convenience wrapper around [`forward_step`].
pub fn forward<T: Scalar>(
    params: &PolicyParams<T>,
    obs: &Observation,
    state: &Hidden<T>,
) -> Result<(Vec<T>, T, Hidden<T>, StepCache<T>)> {
    let input = StepBatch::from_observations(&params.dims, &[obs])?;
    let (out, next, cache) = forward_step(params, &input, state)?;
    Ok((out.logits.data, out.value[0], next, cache))
}

/// Runs a chunk of steps from `initial`. `episode_start[t][r]` zeroes row
/// `r`'s state before step `t`; gradients do not cross those resets.
pub fn unroll<T: Scalar>(
    params: &PolicyParams<T>,
    inputs: &[StepBatch<T>],
    initial: &Hidden<T>,
    episode_start: &[Vec<bool>],
) -> Result<(Vec<StepOutput<T>>, Vec<StepCache<T>>)> {
    if inputs.len() != episode_start.len() {
        return Err(Error::Shape("episode_start length must match chunk length".into()));
    }
    let mut state = initial.clone();
    let mut outs = Vec::with_capacity(inputs.len());
    let mut caches = Vec::with_capacity(inputs.len());
    for (input, starts) in inputs.iter().zip(episode_start) {
        if starts.len() != input.batch() {
            return Err(Error::Shape("episode_start row count must match batch".into()));
        }
        let (out, next, cache) = forward_step_masked(params, input, &state, starts.clone())?;
        state = next;
        outs.push(out);
        caches.push(cache);
    }
    Ok((outs, caches))
}

/// Gradient of the loss w.r.t. one step's encoder inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct InputGrad<T> {
    pub motion: Option<Mat<T>>,
    pub visual: Option<Mat<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub params: PolicyParams<T>,
    pub inputs: Vec<InputGrad<T>>,
    /// Gradient w.r.t. the chunk's initial state (not propagated further).
    pub initial: Hidden<T>,
}

fn encoder_backward<T: Scalar>(
    lin: &Linear<T>,
    grad: &mut Linear<T>,
    x: &Mat<T>,
    z: &Mat<T>,
    dz: Mat<T>,
) -> Mat<T> {
    let mut dpre = dz;
    for (d, zv) in dpre.data.iter_mut().zip(&z.data) {
        *d *= T::one() - *zv * *zv;
    }
    add_dyt_x(&dpre, x, &mut grad.w);
    add_col_sums(&dpre, &mut grad.b);
    let mut dx = Mat::zeros(x.rows, x.cols);
    add_dy_w(&dpre, &lin.w, &mut dx);
    dx
}

/// Reverse-mode gradients of a chunk loss given `∂L/∂logits` and `∂L/∂value`
/// at every step. Backpropagates through time within the chunk and stops at
/// its start.
pub fn backward<T: Scalar>(
    params: &PolicyParams<T>,
    caches: &[StepCache<T>],
    dlogits: &[Mat<T>],
    dvalues: &[Vec<T>],
) -> Result<Gradients<T>> {
    let dims = &params.dims;
    if caches.len() != dlogits.len() || caches.len() != dvalues.len() {
        return Err(Error::Shape("cache and loss-gradient lengths differ".into()));
    }
    let Some(first) = caches.first() else {
        return Err(Error::Shape("empty chunk".into()));
    };
    let b = first.h.rows;
    let hd = dims.hidden;
    for ((c, dl), dv) in caches.iter().zip(dlogits).zip(dvalues) {
        if c.h.rows != b || dl.rows != b || dl.cols != dims.n_actions || dv.len() != b {
            return Err(Error::Shape("loss gradient shape does not match cache".into()));
        }
    }

    let mut g = params.zeros_like();
    let mut inputs = vec![InputGrad { motion: None, visual: None }; caches.len()];
    let mut dh_next = Mat::zeros(b, hd);
    let mut dc_next = Mat::zeros(b, hd);

    for t in (0..caches.len()).rev() {
        let cache = &caches[t];
        let dl = &dlogits[t];
        let dv = Mat::from_vec(b, 1, dvalues[t].clone());

        add_dyt_x(dl, &cache.h, &mut g.actor.w);
        add_col_sums(dl, &mut g.actor.b);
        add_dyt_x(&dv, &cache.h, &mut g.critic.w);
        add_col_sums(&dv, &mut g.critic.b);

        let mut dh = dh_next;
        add_dy_w(dl, &params.actor.w, &mut dh);
        add_dy_w(&dv, &params.critic.w, &mut dh);

        let mut dgates = Mat::zeros(b, 4 * hd);
        let mut dc_prev = Mat::zeros(b, hd);
        for r in 0..b {
            let gt = cache.gates.row(r);
            let tc = cache.tanh_c.row(r);
            let cp = cache.c_prev.row(r);
            let dhr = dh.row(r);
            let dcn = dc_next.row(r);
            let out = &mut dgates.data[r * 4 * hd..(r + 1) * 4 * hd];
            let dcp = &mut dc_prev.data[r * hd..(r + 1) * hd];
            for j in 0..hd {
                let (i, f, gg, o) = (gt[j], gt[hd + j], gt[2 * hd + j], gt[3 * hd + j]);
                let dc = dcn[j] + dhr[j] * o * (T::one() - tc[j] * tc[j]);
                out[j] = dc * gg * i * (T::one() - i);
                out[hd + j] = dc * cp[j] * f * (T::one() - f);
                out[2 * hd + j] = dc * i * (T::one() - gg * gg);
                out[3 * hd + j] = dhr[j] * tc[j] * o * (T::one() - o);
                dcp[j] = dc * f;
            }
        }

        add_dyt_x(&dgates, &cache.u, &mut g.lstm_wx);
        add_dyt_x(&dgates, &cache.h_prev, &mut g.lstm_wh);
        add_col_sums(&dgates, &mut g.lstm_b);

        let mut du = Mat::zeros(b, dims.lstm_in());
        add_dy_w(&dgates, &params.lstm_wx, &mut du);
        let mut dh_prev = Mat::zeros(b, hd);
        add_dy_w(&dgates, &params.lstm_wh, &mut dh_prev);
        for (r, &z) in cache.reset.iter().enumerate() {
            if z {
                dh_prev.row_mut(r).fill(T::zero());
                dc_prev.row_mut(r).fill(T::zero());
            }
        }

        let mut off = 0;
        let slice_du = |off: usize| {
            let mut d = Mat::zeros(b, dims.enc);
            for r in 0..b {
                d.row_mut(r).copy_from_slice(&du.row(r)[off..off + dims.enc]);
            }
            d
        };
        if let (Some(lin), Some(x), Some(z)) = (&params.motion_enc, &cache.input.motion, &cache.zm) {
            let dz = slice_du(off);
            off += dims.enc;
            let grad = g.motion_enc.as_mut().expect("mask matches params");
            inputs[t].motion = Some(encoder_backward(lin, grad, x, z, dz));
        }
        if let (Some(lin), Some(x), Some(z)) = (&params.visual_enc, &cache.input.visual, &cache.zv) {
            let dz = slice_du(off);
            let grad = g.visual_enc.as_mut().expect("mask matches params");
            inputs[t].visual = Some(encoder_backward(lin, grad, x, z, dz));
        }

        dh_next = dh_prev;
        dc_next = dc_prev;
    }

    Ok(Gradients { params: g, inputs, initial: Hidden { h: dh_next, c: dc_next } })
}
