//! Test-only oracles shared by the integration suites.
#![allow(dead_code)]

use odonav::linalg::Mat;
use odonav::percept::GoalModality;
use odonav::policynet::{backward, unroll, ChannelMask, Hidden, NetDims, PolicyParams, StepBatch};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn small_dims(mask: ChannelMask, modality: GoalModality) -> NetDims {
    NetDims::new(8, modality, mask).with_sizes(16, 16)
}

/// Parameters drawn i.i.d. from U(-scale, scale) so every path is exercised.
pub fn random_params(dims: NetDims, scale: f64, rng: &mut ChaCha8Rng) -> PolicyParams<f64> {
    let mut p = PolicyParams::<f64>::zeros(dims).unwrap();
    for (_, m) in p.tensors_mut() {
        m.data.iter_mut().for_each(|v| *v = rng.random_range(-scale..scale));
    }
    p
}

pub struct Chunk {
    pub inputs: Vec<StepBatch<f64>>,
    pub starts: Vec<Vec<bool>>,
    pub initial: Hidden<f64>,
    /// Fixed linear loss weights on logits and values.
    pub wl: Vec<Mat<f64>>,
    pub wv: Vec<Vec<f64>>,
}

pub fn random_chunk(dims: &NetDims, batch: usize, len: usize, rng: &mut ChaCha8Rng) -> Chunk {
    let mat = |r: usize, c: usize, rng: &mut ChaCha8Rng| {
        Mat::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect())
    };
    let inputs = (0..len)
        .map(|_| StepBatch {
            motion: dims.mask.motion.then(|| mat(batch, dims.motion_in(), rng)),
            visual: dims.mask.visual.then(|| mat(batch, dims.visual_in(), rng)),
            prev_action: (0..batch)
                .map(|_| {
                    let a = rng.random_range(0..=dims.n_actions);
                    (a < dims.n_actions).then_some(a)
                })
                .collect(),
        })
        .collect();
    // Reset at t = 0 is never requested: the chunk's initial state must matter.
    let starts = (0..len)
        .map(|t| (0..batch).map(|_| t > 0 && rng.random_bool(0.2)).collect())
        .collect();
    let initial = Hidden { h: mat(batch, dims.hidden, rng), c: mat(batch, dims.hidden, rng) };
    let wl = (0..len).map(|_| mat(batch, dims.n_actions, rng)).collect();
    let wv = (0..len).map(|_| (0..batch).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    Chunk { inputs, starts, initial, wl, wv }
}

/// `L = Σ_t Σ_r wl·logits + wv·value`, recomputed from scratch.
pub fn chunk_loss(params: &PolicyParams<f64>, chunk: &Chunk) -> f64 {
    let (outs, _) = unroll(params, &chunk.inputs, &chunk.initial, &chunk.starts).unwrap();
    let mut loss = 0.0;
    for (t, o) in outs.iter().enumerate() {
        loss += o.logits.data.iter().zip(&chunk.wl[t].data).map(|(a, b)| a * b).sum::<f64>();
        loss += o.value.iter().zip(&chunk.wv[t]).map(|(a, b)| a * b).sum::<f64>();
    }
    loss
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-8 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Max relative error of every parameter gradient against central
/// differences with step `h`.
pub fn param_gradient_error(params: &PolicyParams<f64>, chunk: &Chunk, h: f64) -> f64 {
    let (_, caches) = unroll(params, &chunk.inputs, &chunk.initial, &chunk.starts).unwrap();
    let grads = backward(params, &caches, &chunk.wl, &chunk.wv).unwrap();
    let analytic: Vec<Vec<f64>> = grads.params.tensors().iter().map(|(_, m)| m.data.clone()).collect();
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    let n_tensors = analytic.len();
    for ti in 0..n_tensors {
        let len = analytic[ti].len();
        for k in 0..len {
            let orig = probe.tensors()[ti].1.data[k];
            probe.tensors_mut()[ti].1.data[k] = orig + h;
            let up = chunk_loss(&probe, chunk);
            probe.tensors_mut()[ti].1.data[k] = orig - h;
            let down = chunk_loss(&probe, chunk);
            probe.tensors_mut()[ti].1.data[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(rel_err(analytic[ti][k], numeric));
        }
    }
    worst
}

/// Max relative error of the input gradients (both channels, every step).
pub fn input_gradient_error(params: &PolicyParams<f64>, chunk: &Chunk, h: f64) -> f64 {
    let (_, caches) = unroll(params, &chunk.inputs, &chunk.initial, &chunk.starts).unwrap();
    let grads = backward(params, &caches, &chunk.wl, &chunk.wv).unwrap();
    let mut probe = Chunk {
        inputs: chunk.inputs.clone(),
        starts: chunk.starts.clone(),
        initial: chunk.initial.clone(),
        wl: chunk.wl.clone(),
        wv: chunk.wv.clone(),
    };
    let mut worst: f64 = 0.0;
    for t in 0..chunk.inputs.len() {
        for channel in 0..2 {
            let analytic = match channel {
                0 => grads.inputs[t].motion.clone(),
                _ => grads.inputs[t].visual.clone(),
            };
            let Some(analytic) = analytic else { continue };
            for k in 0..analytic.data.len() {
                let orig = *input_cell(&mut probe, t, channel, k);
                *input_cell(&mut probe, t, channel, k) = orig + h;
                let up = chunk_loss(params, &probe);
                *input_cell(&mut probe, t, channel, k) = orig - h;
                let down = chunk_loss(params, &probe);
                *input_cell(&mut probe, t, channel, k) = orig;
                worst = worst.max(rel_err(analytic.data[k], (up - down) / (2.0 * h)));
            }
        }
    }
    worst
}

fn input_cell(c: &mut Chunk, t: usize, channel: usize, k: usize) -> &mut f64 {
    let m = if channel == 0 { c.inputs[t].motion.as_mut() } else { c.inputs[t].visual.as_mut() };
    &mut m.expect("channel present").data[k]
}

/// Advantages as explicit masked sums `A_t = Σ_l (γλ)^l δ_{t+l}`, in f64.
pub fn gae_oracle(rewards: &[f64], values: &[f64], dones: &[bool], bootstrap: f64, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let next_value = |t: usize| if t + 1 < n { values[t + 1] } else { bootstrap };
    let delta: Vec<f64> = (0..n)
        .map(|t| rewards[t] + if dones[t] { 0.0 } else { gamma * next_value(t) } - values[t])
        .collect();
    let mut adv = vec![0.0; n];
    for t in 0..n {
        let mut weight = 1.0;
        for l in t..n {
            adv[t] += weight * delta[l];
            if dones[l] {
                break;
            }
            weight *= gamma * lambda;
        }
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

/// Discounted return of the remaining episode, bootstrapped at the end of
/// the sequence; equals `A + V` when λ = 1.
pub fn discounted_return(rewards: &[f64], dones: &[bool], bootstrap: f64, gamma: f64, t: usize) -> f64 {
    let mut g = 0.0;
    let mut discount = 1.0;
    for l in t..rewards.len() {
        g += discount * rewards[l];
        if dones[l] {
            return g;
        }
        discount *= gamma;
    }
    g + discount * bootstrap
}

pub struct LossCase {
    pub logits: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

fn log_softmax64(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

/// Random minibatch; a third of the samples sit exactly at ρ = 1 ± 2ε.
pub fn random_loss_case(n: usize, clip: f64, rng: &mut ChaCha8Rng) -> LossCase {
    let mut c = LossCase {
        logits: Vec::new(),
        values: Vec::new(),
        actions: Vec::new(),
        old_log_probs: Vec::new(),
        advantages: Vec::new(),
        returns: Vec::new(),
    };
    for i in 0..n {
        let z: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let a = rng.random_range(0..3);
        let lp = log_softmax64(&z)[a];
        let rho = match i % 6 {
            0 => 1.0 - 2.0 * clip,
            1 => 1.0 + 2.0 * clip,
            _ => rng.random_range(0.5..1.5),
        };
        c.old_log_probs.push(lp - f64::ln(rho));
        c.logits.push(z);
        c.actions.push(a);
        c.values.push(rng.random_range(-1.0..1.0));
        c.advantages.push(rng.random_range(-2.0..2.0));
        c.returns.push(rng.random_range(-1.0..1.0));
    }
    c
}

/// Per-sample scalar recomputation of the PPO loss.
pub fn ppo_loss_oracle(c: &LossCase, clip: f64, value_coef: f64, entropy_coef: f64) -> f64 {
    let n = c.actions.len() as f64;
    let (mut pol, mut val, mut ent) = (0.0, 0.0, 0.0);
    for i in 0..c.actions.len() {
        let lp = log_softmax64(&c.logits[i]);
        let rho = (lp[c.actions[i]] - c.old_log_probs[i]).exp();
        let a = c.advantages[i];
        let unclipped = rho * a;
        let clipped = rho.clamp(1.0 - clip, 1.0 + clip) * a;
        pol += unclipped.min(clipped);
        val += (c.values[i] - c.returns[i]).powi(2);
        ent -= lp.iter().map(|l| l.exp() * l).sum::<f64>();
    }
    -pol / n + value_coef * val / n - entropy_coef * ent / n
}
