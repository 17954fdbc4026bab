//! Observation channels: visual embeddings (file, synthetic, appearance
//! shift), ego-motion (odometry, dead reckoning, error model) and the
//! descriptors the agent receives for its goal.

mod features;
mod fmat;
mod kitti;
mod odometry;

pub use features::{apply_appearance_shift, cosine, synth_route_features, AppearanceShift, FeatureMatrix};
pub use fmat::{load_fmat, read_fmat, write_fmat, write_fmat_to, FMAT_HEADER_LEN, FMAT_MAGIC, FMAT_VERSION};
pub use kitti::{
    ingest_kitti_poses, parse_kitti_poses, parse_route_poses, read_route_poses, write_route_poses,
};
pub use odometry::{
    ate_rmse, corrupt_odometry, integrate_odometry, motion_state_at, parse_odometry, poses_to_odometry, read_odometry,
    wrap_angle, write_odometry, NoiseModel, OdoStep, OdometrySequence,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::routeworld::RoutePose;

pub const MOTION_DIM: usize = 6;
pub const GOAL_POSE_DIM: usize = 4;

/// `[x/L, y/L, sin θ, cos θ, Δd/ℓ̄, Δθ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionState(pub [f32; MOTION_DIM]);

impl MotionState {
    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }
}

/// How the goal is described to the agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalModality {
    /// Embedding of the goal frame.
    #[default]
    Visual,
    /// Normalized goal pose.
    Pose,
    /// Embedding followed by pose.
    Both,
}

impl GoalModality {
    pub fn needs_visual(self) -> bool {
        matches!(self, GoalModality::Visual | GoalModality::Both)
    }

    pub fn needs_pose(self) -> bool {
        matches!(self, GoalModality::Pose | GoalModality::Both)
    }

    /// Goal vector length for embedding dimension `d`.
    pub fn dim(self, d: usize) -> usize {
        let mut n = 0;
        if self.needs_visual() {
            n += d;
        }
        if self.needs_pose() {
            n += GOAL_POSE_DIM;
        }
        n
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GoalModality::Visual => "visual",
            GoalModality::Pose => "pose",
            GoalModality::Both => "both",
        }
    }
}

impl std::str::FromStr for GoalModality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "visual" => Ok(GoalModality::Visual),
            "pose" => Ok(GoalModality::Pose),
            "both" => Ok(GoalModality::Both),
            other => Err(Error::InvalidParameter(format!("unknown goal modality {other:?}"))),
        }
    }
}

pub fn goal_pose_descriptor(pose: &RoutePose, extent: f64) -> [f32; GOAL_POSE_DIM] {
    [
        (pose.x / extent) as f32,
        (pose.y / extent) as f32,
        pose.heading.sin() as f32,
        pose.heading.cos() as f32,
    ]
}

/// Goal vector for `goal` under `modality`: the goal frame's embedding, its
/// normalized pose from `track`, or the embedding followed by the pose.
pub fn goal_observation(
    track: &[RoutePose],
    extent: f64,
    features: Option<&FeatureMatrix>,
    goal: usize,
    modality: GoalModality,
) -> Result<Vec<f32>> {
    if goal >= track.len() {
        return Err(Error::OutOfRange { index: goal, len: track.len() });
    }
    let mut out = Vec::with_capacity(GOAL_POSE_DIM);
    if modality.needs_visual() {
        let f = features.ok_or(Error::MissingChannel("visual features"))?;
        if goal >= f.rows {
            return Err(Error::OutOfRange { index: goal, len: f.rows });
        }
        out.extend_from_slice(f.row(goal));
    }
    if modality.needs_pose() {
        out.extend_from_slice(&goal_pose_descriptor(&track[goal], extent));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pose_goal_at_origin() {
        let track = [RoutePose::new(0, 0.0, 0.0, 0.0), RoutePose::new(1, 1.0, 0.0, 0.0)];
        let g = goal_observation(&track, 10.0, None, 0, GoalModality::Pose).unwrap();
        assert_eq!(g, vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn visual_goal_is_feature_row() {
        let track: Vec<RoutePose> = (0..4).map(|i| RoutePose::new(i, i as f64, 0.0, 0.0)).collect();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let f = synth_route_features(4, 64, 2, &mut rng).unwrap();
        let g = goal_observation(&track, 3.0, Some(&f), 2, GoalModality::Visual).unwrap();
        assert_eq!(g.as_slice(), f.row(2));
        let both = goal_observation(&track, 3.0, Some(&f), 2, GoalModality::Both).unwrap();
        assert_eq!(both.len(), 68);
        assert_eq!(GoalModality::Both.dim(64), 68);
    }

    #[test]
    fn visual_goal_without_features_is_missing_channel() {
        let track = [RoutePose::new(0, 0.0, 0.0, 0.0), RoutePose::new(1, 1.0, 0.0, 0.0)];
        let err = goal_observation(&track, 1.0, None, 1, GoalModality::Visual).unwrap_err();
        assert!(matches!(err, Error::MissingChannel(_)));
    }
}
