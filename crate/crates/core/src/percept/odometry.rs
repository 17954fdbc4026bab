//! Ego-motion as relative steps, dead reckoning, a parametric VO error model
//! and absolute trajectory error.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{MotionState, MOTION_DIM};
use crate::error::{Error, Result};
use crate::routeworld::RoutePose;

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// One relative motion: signed arc step `distance` taken after turning by `dtheta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdoStep {
    pub distance: f64,
    pub dtheta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdometrySequence {
    pub steps: Vec<OdoStep>,
}

impl OdometrySequence {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Relative steps along a pose chain. The turn of each step is the change in
/// direction of travel, so integration from the first pose reproduces the
/// positions exactly; a step against the current direction is a negative
/// distance. With `close_loop`, a final step returns to the first pose.
pub fn poses_to_odometry(poses: &[RoutePose], close_loop: bool) -> Result<OdometrySequence> {
    if poses.len() < 2 {
        return Err(Error::InvalidInput("odometry needs at least 2 poses".into()));
    }
    let mut pts: Vec<(f64, f64)> = poses.iter().map(|p| (p.x, p.y)).collect();
    if close_loop {
        pts.push(pts[0]);
    }
    let mut heading = poses[0].heading;
    let mut steps = Vec::with_capacity(pts.len() - 1);
    for w in pts.windows(2) {
        let (dx, dy) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
        let len = dx.hypot(dy);
        if len == 0.0 {
            steps.push(OdoStep { distance: 0.0, dtheta: 0.0 });
            continue;
        }
        let travel = dy.atan2(dx);
        let turn = wrap_angle(travel - heading);
        let (distance, next) = if turn.abs() > PI / 2.0 {
            (-len, wrap_angle(travel + PI))
        } else {
            (len, travel)
        };
        steps.push(OdoStep { distance, dtheta: wrap_angle(next - heading) });
        heading = next;
    }
    Ok(OdometrySequence { steps })
}

/// Dead reckoning: `θ' = wrap(θ + Δθ)`, `x' = x + Δd cos θ'`, `y' = y + Δd sin θ'`.
/// Returns `len + 1` poses starting with `start`.
pub fn integrate_odometry(odo: &OdometrySequence, start: &RoutePose) -> Vec<RoutePose> {
    let mut out = Vec::with_capacity(odo.len() + 1);
    let mut cur = *start;
    out.push(cur);
    for s in &odo.steps {
        let heading = wrap_angle(cur.heading + s.dtheta);
        cur = RoutePose {
            frame_index: cur.frame_index + 1,
            x: cur.x + s.distance * heading.cos(),
            y: cur.y + s.distance * heading.sin(),
            heading,
        };
        out.push(cur);
    }
    out
}

/// VO error: multiplicative step-length noise, additive heading noise and a
/// systematic scale bias.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseModel {
    pub sigma_d: f64,
    pub sigma_theta: f64,
    pub bias_scale: f64,
}

impl NoiseModel {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.sigma_d == 0.0 && self.sigma_theta == 0.0 && self.bias_scale == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.sigma_d) || !ok(self.sigma_theta) || !self.bias_scale.is_finite() {
            return Err(Error::InvalidParameter(format!("invalid noise model {self:?}")));
        }
        Ok(())
    }
}

/// `Δd' = Δd (1 + bias + ε_d)`, `Δθ' = Δθ + ε_θ` with independent Gaussian
/// `ε_d ~ N(0, σ_d²)`, `ε_θ ~ N(0, σ_θ²)`.
pub fn corrupt_odometry<R: Rng + ?Sized>(
    odo: &OdometrySequence,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<OdometrySequence> {
    noise.validate()?;
    let steps = odo
        .steps
        .iter()
        .map(|s| {
            let zd: f64 = rng.sample(StandardNormal);
            let zt: f64 = rng.sample(StandardNormal);
            OdoStep {
                distance: s.distance * (1.0 + noise.bias_scale + noise.sigma_d * zd),
                dtheta: s.dtheta + noise.sigma_theta * zt,
            }
        })
        .collect();
    Ok(OdometrySequence { steps })
}

/// Root-mean-square position error without alignment.
pub fn ate_rmse(estimated: &[RoutePose], reference: &[RoutePose]) -> Result<f64> {
    if estimated.len() != reference.len() {
        return Err(Error::InvalidInput(format!(
            "trajectory lengths differ: {} vs {}",
            estimated.len(),
            reference.len()
        )));
    }
    if estimated.is_empty() {
        return Err(Error::InvalidInput("empty trajectories".into()));
    }
    let sq: f64 = estimated
        .iter()
        .zip(reference)
        .map(|(a, b)| (a.x - b.x).powi(2) + (a.y - b.y).powi(2))
        .sum();
    Ok((sq / estimated.len() as f64).sqrt())
}

/// Motion state of frame `t` of an integrated track. The step components are
/// recovered from frames `t - 1` and `t` and are zero at `t = 0`.
pub fn motion_state_at(track: &[RoutePose], t: usize, extent: f64, mean_step: f64) -> Result<MotionState> {
    if t >= track.len() {
        return Err(Error::OutOfRange { index: t, len: track.len() });
    }
    if !(extent > 0.0 && mean_step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "extent ({extent}) and mean step ({mean_step}) must be positive"
        )));
    }
    let p = &track[t];
    let (dd, dth) = if t == 0 {
        (0.0, 0.0)
    } else {
        let q = &track[t - 1];
        let (s, c) = p.heading.sin_cos();
        ((p.x - q.x) * c + (p.y - q.y) * s, wrap_angle(p.heading - q.heading))
    };
    let v: [f64; MOTION_DIM] = [p.x / extent, p.y / extent, p.heading.sin(), p.heading.cos(), dd / mean_step, dth];
    Ok(MotionState(v.map(|x| x as f32)))
}

/// Text form: one `distance dtheta` pair per line, `#` comments allowed.
pub fn write_odometry(odo: &OdometrySequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("# distance dtheta\n");
    for s in &odo.steps {
        let _ = writeln!(out, "{} {}", s.distance, s.dtheta);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn parse_odometry(text: &str) -> Result<OdometrySequence> {
    let mut steps = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = t
            .split_whitespace()
            .map(|v| v.parse().map_err(|_| Error::Parse { line: i + 1, msg: format!("non-numeric token {v:?}") }))
            .collect::<Result<_>>()?;
        if vals.len() != 2 {
            return Err(Error::Parse { line: i + 1, msg: format!("expected 2 fields, found {}", vals.len()) });
        }
        steps.push(OdoStep { distance: vals[0], dtheta: vals[1] });
    }
    Ok(OdometrySequence { steps })
}

pub fn read_odometry(path: impl AsRef<Path>) -> Result<OdometrySequence> {
    let path = path.as_ref();
    parse_odometry(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}
