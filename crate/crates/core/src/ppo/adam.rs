use super::PpoConfig;
use crate::policynet::PolicyParams;
use crate::scalar::Scalar;

/// First/second moment estimates shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: PolicyParams<T>,
    pub v: PolicyParams<T>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &PolicyParams<T>) -> Self {
        Self { m: params.zeros_like(), v: params.zeros_like(), step: 0 }
    }
}

/// Scales `grads` so their global norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_global_norm<T: Scalar>(grads: &mut PolicyParams<T>, max_norm: f64) -> T {
    let norm = grads.global_norm();
    let max = T::lit(max_norm);
    if norm > max && norm > T::zero() {
        grads.scale(max / norm);
    }
    norm
}

/// Adam with bias correction.
pub fn adam_step<T: Scalar>(params: &mut PolicyParams<T>, grads: &PolicyParams<T>, state: &mut AdamState<T>, cfg: &PpoConfig) {
    state.step += 1;
    let (b1, b2) = (T::lit(cfg.adam_beta1), T::lit(cfg.adam_beta2));
    let t = state.step as i32;
    let c1 = T::one() - b1.powi(t);
    let c2 = T::one() - b2.powi(t);
    let lr = T::lit(cfg.lr);
    let eps = T::lit(cfg.adam_eps);
    let p = params.tensors_mut();
    let g = grads.tensors();
    let m = state.m.tensors_mut();
    let v = state.v.tensors_mut();
    for (((pt, gt), mt), vt) in p.into_iter().zip(g).zip(m).zip(v) {
        for (((w, &gi), mi), vi) in pt.1.data.iter_mut().zip(&gt.1.data).zip(mt.1.data.iter_mut()).zip(vt.1.data.iter_mut()) {
            *mi = b1 * *mi + (T::one() - b1) * gi;
            *vi = b2 * *vi + (T::one() - b2) * gi * gi;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::percept::GoalModality;
    use crate::policynet::{ChannelMask, NetDims};

    fn params() -> PolicyParams<f64> {
        let dims = NetDims::new(4, GoalModality::Visual, ChannelMask::FULL).with_sizes(3, 2);
        let mut p = PolicyParams::zeros(dims).unwrap();
        for (i, (_, m)) in p.tensors_mut().into_iter().enumerate() {
            m.data.iter_mut().enumerate().for_each(|(k, v)| *v = ((i * 31 + k) as f64).sin());
        }
        p
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = params();
        let before = p.clone();
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &before.zeros_like(), &mut st, &PpoConfig::default());
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let cfg = PpoConfig::default();
        let mut p = params();
        let before = p.clone();
        let mut g = params();
        g.scale(3.0);
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &g, &mut st, &cfg);
        for (((_, a), (_, b)), (_, gm)) in p.tensors().iter().zip(before.tensors()).zip(g.tensors()) {
            for ((x, y), gi) in a.data.iter().zip(&b.data).zip(&gm.data) {
                if gi.abs() > 1e-2 {
                    let step = y - x;
                    let want = cfg.lr * gi.signum();
                    assert!((step - want).abs() <= 1e-3 * cfg.lr, "{step} vs {want}");
                }
            }
        }
    }

    #[test]
    fn clip_scales_to_max_norm() {
        let mut g = params();
        let n0 = g.global_norm();
        let reported = clip_global_norm(&mut g, 0.5);
        assert_eq!(reported, n0);
        assert!((g.global_norm() - 0.5).abs() < 1e-12);
    }
}
