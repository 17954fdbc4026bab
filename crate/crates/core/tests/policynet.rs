mod common;

use common::*;
use odonav::linalg::Mat;
use odonav::percept::{GoalModality, MotionState};
use odonav::policynet::{backward, forward, init_params, unroll, ChannelMask, Hidden, NetDims, PolicyParams};
use odonav::routeworld::Observation;
use rand::Rng;

#[test]
fn parameter_gradients_match_finite_differences() {
    let mut r = rng(11);
    for (mask, modality) in [
        (ChannelMask::FULL, GoalModality::Both),
        (ChannelMask::MOTION_ONLY, GoalModality::Pose),
        (ChannelMask::VISION_ONLY, GoalModality::Visual),
    ] {
        let dims = small_dims(mask, modality);
        let params = random_params(dims, 0.5, &mut r);
        let chunk = random_chunk(&dims, 2, 5, &mut r);
        let err = param_gradient_error(&params, &chunk, 1e-5);
        assert!(err <= 1e-4, "{mask:?}: max relative error {err}");
    }
}

#[test]
fn input_gradients_match_finite_differences() {
    let mut r = rng(12);
    let dims = small_dims(ChannelMask::FULL, GoalModality::Both);
    let params = random_params(dims, 0.5, &mut r);
    let chunk = random_chunk(&dims, 3, 4, &mut r);
    let err = input_gradient_error(&params, &chunk, 1e-5);
    assert!(err <= 1e-4, "max relative error {err}");
}

#[test]
fn zero_and_scaled_loss_gradients() {
    let mut r = rng(13);
    let dims = small_dims(ChannelMask::FULL, GoalModality::Visual);
    let params = random_params(dims, 0.5, &mut r);
    let chunk = random_chunk(&dims, 2, 5, &mut r);
    let (_, caches) = unroll(&params, &chunk.inputs, &chunk.initial, &chunk.starts).unwrap();

    let zl: Vec<Mat<f64>> = chunk.wl.iter().map(|m| Mat::zeros(m.rows, m.cols)).collect();
    let zv: Vec<Vec<f64>> = chunk.wv.iter().map(|v| vec![0.0; v.len()]).collect();
    let g0 = backward(&params, &caches, &zl, &zv).unwrap();
    assert!(g0.params.tensors().iter().all(|(_, m)| m.data.iter().all(|&v| v == 0.0)));

    let g1 = backward(&params, &caches, &chunk.wl, &chunk.wv).unwrap();
    let wl2: Vec<Mat<f64>> =
        chunk.wl.iter().map(|m| Mat::from_vec(m.rows, m.cols, m.data.iter().map(|v| 2.0 * v).collect())).collect();
    let wv2: Vec<Vec<f64>> = chunk.wv.iter().map(|v| v.iter().map(|x| 2.0 * x).collect()).collect();
    let g2 = backward(&params, &caches, &wl2, &wv2).unwrap();
    for ((_, a), (_, b)) in g1.params.tensors().iter().zip(g2.params.tensors()) {
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((2.0 * x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }
}

#[test]
fn mismatched_loss_gradients_rejected() {
    let mut r = rng(14);
    let dims = small_dims(ChannelMask::FULL, GoalModality::Visual);
    let params = random_params(dims, 0.5, &mut r);
    let chunk = random_chunk(&dims, 2, 3, &mut r);
    let (_, caches) = unroll(&params, &chunk.inputs, &chunk.initial, &chunk.starts).unwrap();
    assert!(backward(&params, &caches, &chunk.wl[..2], &chunk.wv).is_err());
    let bad: Vec<Mat<f64>> = chunk.wl.iter().map(|_| Mat::zeros(2, 5)).collect();
    assert!(backward(&params, &caches, &bad, &chunk.wv).is_err());
}

fn observation(dims: &NetDims, r: &mut impl Rng) -> Observation {
    let mut m = [0f32; 6];
    m.iter_mut().for_each(|v| *v = r.random_range(-1.0..1.0));
    Observation {
        motion: MotionState(m),
        visual: Some((0..dims.d_visual).map(|_| r.random_range(-1.0..1.0)).collect()),
        goal: (0..dims.d_goal).map(|_| r.random_range(-1.0..1.0)).collect(),
        prev_action: [0.0, 1.0, 0.0],
    }
}

#[test]
fn zero_params_give_uniform_policy() {
    let dims = NetDims::new(8, GoalModality::Both, ChannelMask::FULL).with_sizes(16, 16);
    let params = PolicyParams::<f32>::zeros(dims).unwrap();
    let mut r = rng(1);
    let obs = observation(&dims, &mut r);
    let (logits, value, _, _) = forward(&params, &obs, &Hidden::zeros(1, 16)).unwrap();
    assert_eq!(logits.len(), 3);
    assert!(logits.iter().all(|&l| l == logits[0]));
    assert_eq!(value, 0.0);
}

#[test]
fn init_is_seeded_finite_and_shaped() {
    let dims = NetDims::new(64, GoalModality::Both, ChannelMask::FULL);
    let a: PolicyParams<f32> = init_params(dims, &mut rng(3)).unwrap();
    let b: PolicyParams<f32> = init_params(dims, &mut rng(3)).unwrap();
    assert_eq!(a, b);
    assert!(a.is_finite());
    assert_eq!(a.lstm_wx.rows, 4 * 256);
    assert_eq!(a.lstm_wx.cols, 2 * 512 + 3);
    assert_eq!(a.motion_enc.as_ref().unwrap().w.cols, 10);
    assert_eq!(a.visual_enc.as_ref().unwrap().w.cols, 128);
    assert_eq!(a.actor.w.rows, 3);
    assert_eq!(&a.lstm_b.data[256..512], &[1.0f32; 256][..]);
}

#[test]
fn actor_output_spread_much_smaller_than_critic() {
    let dims = NetDims::new(16, GoalModality::Visual, ChannelMask::FULL).with_sizes(64, 32);
    let params: PolicyParams<f64> = init_params(dims, &mut rng(5)).unwrap();
    let mut r = rng(6);
    let (mut logits, mut values) = (Vec::new(), Vec::new());
    for _ in 0..500 {
        let obs = observation(&dims, &mut r);
        let (l, v, _, _) = forward(&params, &obs, &Hidden::zeros(1, 32)).unwrap();
        logits.push(l[0]);
        values.push(v);
    }
    let std = |x: &[f64]| {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
    };
    assert!(std(&logits) * 20.0 < std(&values), "{} vs {}", std(&logits), std(&values));
}

#[test]
fn masked_channel_input_is_ignored() {
    let dims = NetDims::new(8, GoalModality::Pose, ChannelMask::MOTION_ONLY).with_sizes(16, 16);
    let params: PolicyParams<f32> = init_params(dims, &mut rng(8)).unwrap();
    let mut r = rng(9);
    let mut obs = observation(&dims, &mut r);
    let state = Hidden::zeros(1, 16);
    let (l1, v1, _, _) = forward(&params, &obs, &state).unwrap();
    obs.visual = Some(vec![1e6; 8]);
    let (l2, v2, _, _) = forward(&params, &obs, &state).unwrap();
    assert_eq!((l1, v1), (l2, v2));
    obs.visual = None;
    assert!(forward(&params, &obs, &state).is_ok());
}

#[test]
fn wrong_observation_shape_is_shape_error() {
    let dims = NetDims::new(8, GoalModality::Visual, ChannelMask::FULL).with_sizes(16, 16);
    let params: PolicyParams<f32> = init_params(dims, &mut rng(8)).unwrap();
    let mut obs = observation(&dims, &mut rng(1));
    obs.visual = Some(vec![0.0; 5]);
    let err = forward(&params, &obs, &Hidden::zeros(1, 16)).unwrap_err();
    assert_eq!(err.kind(), "ShapeError");
}

#[test]
fn invalid_dims_rejected() {
    let mut dims = NetDims::new(8, GoalModality::Visual, ChannelMask::MOTION_ONLY);
    assert!(dims.validate().is_err());
    dims = NetDims::new(8, GoalModality::Pose, ChannelMask::VISION_ONLY);
    assert!(dims.validate().is_err());
    dims = NetDims::new(8, GoalModality::Visual, ChannelMask { motion: false, visual: false });
    assert!(dims.validate().is_err());
}
