//! Everything needed to instantiate environments for one route: graph,
//! clean odometry, embeddings, env settings, and the perturbations applied at
//! deployment (appearance shift, odometry noise).

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::percept::{
    apply_appearance_shift, ate_rmse, corrupt_odometry, goal_pose_descriptor, integrate_odometry, motion_state_at,
    poses_to_odometry, synth_route_features, AppearanceShift, FeatureMatrix, NoiseModel, OdometrySequence,
};
use crate::routeworld::{build_route, synth_loop_poses, EnvConfig, NavEnv, RouteGraph, RoutePose, Sensors};

#[derive(Debug, Clone)]
pub struct Scenario {
    pub graph: Arc<RouteGraph>,
    pub odometry: OdometrySequence,
    pub features: Option<Arc<FeatureMatrix>>,
    pub env: EnvConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Perturbation {
    pub appearance: Option<AppearanceShift>,
    pub noise: Option<NoiseModel>,
    pub noise_seed: u64,
}

impl Perturbation {
    pub fn none() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone)]
pub struct SensorBuild {
    pub sensors: Arc<Sensors>,
    /// Position error of the dead-reckoned track against the route, meters.
    pub ate: f64,
    pub track: Vec<RoutePose>,
}

impl Scenario {
    pub fn new(graph: RouteGraph, features: Option<FeatureMatrix>, env: EnvConfig) -> Result<Self> {
        if let Some(f) = &features {
            if f.rows != graph.len() {
                return Err(Error::Shape(format!(
                    "{} feature rows for a {}-frame route",
                    f.rows,
                    graph.len()
                )));
            }
        }
        if env.goal_modality.needs_visual() && features.is_none() {
            return Err(Error::MissingChannel("visual features"));
        }
        if !(graph.extent > 0.0) {
            return Err(Error::InvalidRoute("route has zero extent".into()));
        }
        let odometry = poses_to_odometry(&graph.nodes, graph.is_loop)?;
        Ok(Self { graph: Arc::new(graph), odometry, features: features.map(Arc::new), env })
    }

    /// Synthetic loop of `nodes` frames with `dim`-d embeddings.
    pub fn synthetic(nodes: usize, dim: usize, smooth_l: usize, seed: u64, env: EnvConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let poses = synth_loop_poses(nodes, &mut rng)?;
        let features = synth_route_features(nodes, dim, smooth_l, &mut rng)?;
        Self::new(build_route(&poses, true)?, Some(features), env)
    }

    pub fn feature_dim(&self) -> usize {
        self.features.as_ref().map_or(0, |f| f.cols)
    }

    /// Dead-reckoned track (first frame anchored to the route) under `noise`.
    pub fn track(&self, noise: &NoiseModel, seed: u64) -> Result<Vec<RoutePose>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let odo = corrupt_odometry(&self.odometry, noise, &mut rng)?;
        let mut track = integrate_odometry(&odo, &self.graph.nodes[0]);
        track.truncate(self.graph.len());
        Ok(track)
    }

    pub fn sensors(&self, p: &Perturbation) -> Result<SensorBuild> {
        let g = &self.graph;
        let track = self.track(&p.noise.unwrap_or_default(), p.noise_seed)?;
        let ate = ate_rmse(&track, &g.nodes)?;
        let mean_step = g.mean_step_length();
        let motion = (0..g.len())
            .map(|t| motion_state_at(&track, t, g.extent, mean_step))
            .collect::<Result<Vec<_>>>()?;
        let goal_pose = track.iter().map(|p| goal_pose_descriptor(p, g.extent)).collect();
        let visual = match (&self.features, &p.appearance) {
            (Some(f), Some(shift)) => Some(apply_appearance_shift(f, shift)?),
            (Some(f), None) => Some((**f).clone()),
            (None, _) => None,
        };
        let sensors = Sensors { motion, visual, goal_visual: self.features.as_deref().cloned(), goal_pose };
        Ok(SensorBuild { sensors: Arc::new(sensors), ate, track })
    }

    pub fn make_envs(&self, n: usize, sensors: &Arc<Sensors>) -> Result<Vec<NavEnv>> {
        (0..n)
            .map(|_| NavEnv::new(Arc::clone(&self.graph), Arc::clone(sensors), self.env))
            .collect()
    }
}
