//! Route-graph navigation environment: a single traversal discretized into
//! frames, chain or loop adjacency, sparse goal reward and a finite horizon.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::percept::{FeatureMatrix, GoalModality, MotionState};

pub const N_ACTIONS: usize = 3;

/// Planar pose of one route frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoutePose {
    pub frame_index: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl RoutePose {
    pub fn new(frame_index: usize, x: f64, y: f64, heading: f64) -> Self {
        Self { frame_index, x, y, heading }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteGraph {
    pub nodes: Vec<RoutePose>,
    pub adjacency: Vec<Vec<usize>>,
    pub is_loop: bool,
    /// Maximum pairwise position distance, meters.
    pub extent: f64,
}

/// Builds the chain (or loop) graph over a traversal. Poses may arrive in any
/// order but their frame indices must be exactly `0..n`.
pub fn build_route(poses: &[RoutePose], is_loop: bool) -> Result<RouteGraph> {
    if poses.len() < 2 {
        return Err(Error::InvalidRoute(format!("need at least 2 poses, got {}", poses.len())));
    }
    let n = poses.len();
    let mut nodes: Vec<Option<RoutePose>> = vec![None; n];
    for p in poses {
        if p.frame_index >= n {
            return Err(Error::InvalidRoute(format!(
                "frame index {} not contiguous from 0 (n = {n})",
                p.frame_index
            )));
        }
        if nodes[p.frame_index].replace(*p).is_some() {
            return Err(Error::InvalidRoute(format!("duplicate frame index {}", p.frame_index)));
        }
        if !(p.x.is_finite() && p.y.is_finite() && p.heading.is_finite()) {
            return Err(Error::InvalidRoute(format!("non-finite pose at frame {}", p.frame_index)));
        }
    }
    let nodes: Vec<RoutePose> = nodes.into_iter().map(|p| p.expect("all indices filled")).collect();

    let mut adjacency = vec![Vec::with_capacity(2); n];
    let mut link = |a: usize, b: usize| {
        if a != b && !adjacency[a].contains(&b) {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
    };
    for i in 1..n {
        link(i - 1, i);
    }
    if is_loop {
        link(n - 1, 0);
    }
    for nb in &mut adjacency {
        nb.sort_unstable();
    }

    let mut extent = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let d = (nodes[i].x - nodes[j].x).hypot(nodes[i].y - nodes[j].y);
            extent = extent.max(d);
        }
    }

    Ok(RouteGraph { nodes, adjacency, is_loop, extent })
}

impl RouteGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn check(&self, id: usize) -> Result<()> {
        if id < self.len() {
            Ok(())
        } else {
            Err(Error::OutOfRange { index: id, len: self.len() })
        }
    }

    /// Shortest-path length in edges.
    pub fn geodesic(&self, a: usize, b: usize) -> Result<usize> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.geodesic_unchecked(a, b))
    }

    pub(crate) fn geodesic_unchecked(&self, a: usize, b: usize) -> usize {
        let d = a.abs_diff(b);
        if self.is_loop {
            d.min(self.len() - d)
        } else {
            d
        }
    }

    /// Largest geodesic distance reachable from `node`.
    pub fn max_distance_from(&self, node: usize) -> usize {
        if self.is_loop {
            self.len() / 2
        } else {
            node.max(self.len() - 1 - node)
        }
    }

    /// Largest geodesic distance between any two nodes.
    pub fn diameter(&self) -> usize {
        if self.is_loop {
            self.len() / 2
        } else {
            self.len() - 1
        }
    }

    /// Mean distance between consecutive frames (including the wrap step on a loop).
    pub fn mean_step_length(&self) -> f64 {
        let n = self.len();
        let steps = if self.is_loop { n } else { n - 1 };
        let total: f64 = (0..steps)
            .map(|i| {
                let a = &self.nodes[i];
                let b = &self.nodes[(i + 1) % n];
                (a.x - b.x).hypot(a.y - b.y)
            })
            .sum();
        total / steps as f64
    }

    /// Node reached from `node` under `action`. Off-route moves at chain
    /// endpoints leave the agent in place.
    pub fn transition(&self, node: usize, action: Action) -> usize {
        let n = self.len();
        match action {
            Action::Stay => node,
            Action::Forward => {
                if node + 1 < n {
                    node + 1
                } else if self.is_loop {
                    0
                } else {
                    node
                }
            }
            Action::Backward => {
                if node > 0 {
                    node - 1
                } else if self.is_loop {
                    n - 1
                } else {
                    node
                }
            }
        }
    }

    /// Nodes whose geodesic distance from `start` lies in `[min, max]`, in a
    /// fixed order (nearest first, forward side before backward side).
    pub fn goals_within(&self, start: usize, min: usize, max: usize) -> Vec<usize> {
        let n = self.len();
        let top = max.min(self.max_distance_from(start));
        let mut out = Vec::new();
        for d in min..=top {
            if self.is_loop {
                let fwd = (start + d) % n;
                let bwd = (start + n - d % n) % n;
                out.push(fwd);
                if bwd != fwd {
                    out.push(bwd);
                }
            } else {
                if start + d < n {
                    out.push(start + d);
                }
                if d <= start {
                    out.push(start - d);
                }
            }
        }
        out
    }

    /// Greedy shortest-path action from `from` towards `to`.
    pub fn shortest_path_action(&self, from: usize, to: usize) -> Action {
        if from == to {
            return Action::Stay;
        }
        let fwd = self.transition(from, Action::Forward);
        if self.geodesic_unchecked(fwd, to) < self.geodesic_unchecked(from, to) {
            Action::Forward
        } else {
            Action::Backward
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Forward,
    Backward,
    Stay,
}

impl Action {
    pub const ALL: [Action; N_ACTIONS] = [Action::Forward, Action::Backward, Action::Stay];

    pub fn index(self) -> usize {
        match self {
            Action::Forward => 0,
            Action::Backward => 1,
            Action::Stay => 2,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or(Error::OutOfRange { index: i, len: N_ACTIONS })
    }
}

/// Maximum episode length as a function of the start-goal distance:
/// `T = max(min_steps, per_distance · d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonPolicy {
    pub min_steps: usize,
    pub per_distance: usize,
}

impl Default for HorizonPolicy {
    fn default() -> Self {
        Self { min_steps: 50, per_distance: 4 }
    }
}

impl HorizonPolicy {
    pub fn horizon(&self, distance: usize) -> usize {
        self.min_steps.max(self.per_distance * distance).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnvConfig {
    pub horizon: HorizonPolicy,
    pub goal_modality: GoalModality,
}

/// Goal-distance range `[min_distance, max_distance]` of one curriculum level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CurriculumLevel {
    pub min_distance: usize,
    pub max_distance: usize,
}

impl CurriculumLevel {
    pub fn new(min_distance: usize, max_distance: usize) -> Result<Self> {
        if min_distance < 1 || min_distance > max_distance {
            return Err(Error::InvalidParameter(format!(
                "curriculum level needs 1 <= d_min <= d_max, got [{min_distance}, {max_distance}]"
            )));
        }
        Ok(Self { min_distance, max_distance })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeState {
    pub start_node: usize,
    pub current_node: usize,
    pub goal_node: usize,
    pub steps_taken: usize,
    pub horizon: usize,
    pub done: bool,
}

/// Samples a start uniformly over nodes that admit a goal in range, then a
/// goal uniformly over the nodes at an admissible distance.
pub fn sample_episode<R: Rng + ?Sized>(
    graph: &RouteGraph,
    horizon: &HorizonPolicy,
    level: CurriculumLevel,
    rng: &mut R,
) -> Result<EpisodeState> {
    let feasible = |s: usize| level.min_distance <= level.max_distance.min(graph.max_distance_from(s));
    let start = if graph.is_loop {
        if !feasible(0) {
            return Err(Error::InfeasibleLevel { min: level.min_distance, max: level.max_distance });
        }
        rng.random_range(0..graph.len())
    } else {
        let starts: Vec<usize> = (0..graph.len()).filter(|&s| feasible(s)).collect();
        if starts.is_empty() {
            return Err(Error::InfeasibleLevel { min: level.min_distance, max: level.max_distance });
        }
        starts[rng.random_range(0..starts.len())]
    };
    let goals = graph.goals_within(start, level.min_distance, level.max_distance);
    let goal = goals[rng.random_range(0..goals.len())];
    Ok(EpisodeState {
        start_node: start,
        current_node: start,
        goal_node: goal,
        steps_taken: 0,
        horizon: horizon.horizon(graph.geodesic_unchecked(start, goal)),
        done: false,
    })
}

/// Per-step agent input.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub motion: MotionState,
    pub visual: Option<Vec<f32>>,
    pub goal: Vec<f32>,
    /// One-hot previous action; all zeros on the first step of an episode.
    pub prev_action: [f32; N_ACTIONS],
}

impl Observation {
    pub fn prev_action_index(&self) -> Option<usize> {
        self.prev_action.iter().position(|&v| v > 0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepInfo {
    pub reached_goal: bool,
    pub geodesic_to_goal: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f32,
    pub done: bool,
    pub info: StepInfo,
}

/// Per-node observation tables backing an environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Sensors {
    /// Motion state per node, derived from the (possibly corrupted) integrated track.
    pub motion: Vec<MotionState>,
    /// Visual embeddings seen while driving (possibly appearance-shifted).
    pub visual: Option<FeatureMatrix>,
    /// Embeddings used to describe goals; always training-condition features.
    pub goal_visual: Option<FeatureMatrix>,
    /// Goal pose descriptors `[x/L, y/L, sin θ, cos θ]` per node.
    pub goal_pose: Vec<[f32; 4]>,
}

impl Sensors {
    pub fn goal_vector(&self, goal: usize, modality: GoalModality) -> Result<Vec<f32>> {
        let visual = || -> Result<Vec<f32>> {
            let f = self.goal_visual.as_ref().ok_or(Error::MissingChannel("visual goal features"))?;
            if goal >= f.rows {
                return Err(Error::OutOfRange { index: goal, len: f.rows });
            }
            Ok(f.row(goal).to_vec())
        };
        let pose = || -> Result<Vec<f32>> {
            self.goal_pose
                .get(goal)
                .map(|p| p.to_vec())
                .ok_or(Error::OutOfRange { index: goal, len: self.goal_pose.len() })
        };
        Ok(match modality {
            GoalModality::Visual => visual()?,
            GoalModality::Pose => pose()?,
            GoalModality::Both => {
                let mut v = visual()?;
                v.extend(pose()?);
                v
            }
        })
    }
}

/// One navigation environment instance. Not shared between callers.
#[derive(Debug, Clone)]
pub struct NavEnv {
    pub graph: Arc<RouteGraph>,
    pub sensors: Arc<Sensors>,
    pub config: EnvConfig,
    state: Option<EpisodeState>,
    goal_vec: Vec<f32>,
}

impl NavEnv {
    pub fn new(graph: Arc<RouteGraph>, sensors: Arc<Sensors>, config: EnvConfig) -> Result<Self> {
        let n = graph.len();
        if sensors.motion.len() != n || sensors.goal_pose.len() != n {
            return Err(Error::Shape(format!(
                "sensor tables cover {} nodes, route has {n}",
                sensors.motion.len()
            )));
        }
        for f in [&sensors.visual, &sensors.goal_visual].into_iter().flatten() {
            if f.rows != n {
                return Err(Error::Shape(format!("feature matrix has {} rows, route has {n}", f.rows)));
            }
        }
        if config.goal_modality.needs_visual() && sensors.goal_visual.is_none() {
            return Err(Error::MissingChannel("visual goal features"));
        }
        Ok(Self { graph, sensors, config, state: None, goal_vec: Vec::new() })
    }

    pub fn state(&self) -> Option<&EpisodeState> {
        self.state.as_ref()
    }

    pub fn reset<R: Rng + ?Sized>(&mut self, level: CurriculumLevel, rng: &mut R) -> Result<Observation> {
        let st = sample_episode(&self.graph, &self.config.horizon, level, rng)?;
        self.start_episode(st)
    }

    /// Starts an episode from an explicit start/goal pair.
    pub fn reset_to(&mut self, start: usize, goal: usize) -> Result<Observation> {
        let d = self.graph.geodesic(start, goal)?;
        self.start_episode(EpisodeState {
            start_node: start,
            current_node: start,
            goal_node: goal,
            steps_taken: 0,
            horizon: self.config.horizon.horizon(d),
            done: start == goal,
        })
    }

    fn start_episode(&mut self, st: EpisodeState) -> Result<Observation> {
        self.goal_vec = self.sensors.goal_vector(st.goal_node, self.config.goal_modality)?;
        self.state = Some(st);
        Ok(self.observe(st.current_node, None))
    }

    fn observe(&self, node: usize, prev: Option<Action>) -> Observation {
        let mut prev_action = [0.0; N_ACTIONS];
        if let Some(a) = prev {
            prev_action[a.index()] = 1.0;
        }
        Observation {
            motion: self.sensors.motion[node],
            visual: self.sensors.visual.as_ref().map(|f| f.row(node).to_vec()),
            goal: self.goal_vec.clone(),
            prev_action,
        }
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult> {
        let graph = Arc::clone(&self.graph);
        let st = self.state.as_mut().ok_or(Error::EpisodeFinished)?;
        if st.done {
            return Err(Error::EpisodeFinished);
        }
        st.current_node = graph.transition(st.current_node, action);
        st.steps_taken += 1;
        let reached = st.current_node == st.goal_node;
        st.done = reached || st.steps_taken >= st.horizon;
        let info = StepInfo {
            reached_goal: reached,
            geodesic_to_goal: graph.geodesic_unchecked(st.current_node, st.goal_node),
        };
        let (node, done) = (st.current_node, st.done);
        Ok(StepResult {
            observation: self.observe(node, Some(action)),
            reward: if reached { 1.0 } else { 0.0 },
            done,
            info,
        })
    }
}

/// Closed, gently wobbling loop of `n` frames with about one meter between
/// frames; headings follow the direction of travel.
pub fn synth_loop_poses<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<RoutePose>> {
    use std::f64::consts::TAU;
    if n < 3 {
        return Err(Error::InvalidRoute(format!("a loop needs at least 3 frames, got {n}")));
    }
    let radius = n as f64 / TAU;
    let harmonics: Vec<(f64, f64, f64)> = (2..=4)
        .map(|k| (k as f64, rng.random_range(-0.08..0.08), rng.random_range(0.0..TAU)))
        .collect();
    let point = |i: usize| {
        let phi = TAU * i as f64 / n as f64;
        let r = radius * (1.0 + harmonics.iter().map(|(k, a, p)| a * (k * phi + p).cos()).sum::<f64>());
        (r * phi.cos(), r * phi.sin())
    };
    let pts: Vec<(f64, f64)> = (0..n).map(point).collect();
    Ok((0..n)
        .map(|i| {
            let (ax, ay) = pts[(i + n - 1) % n];
            let (bx, by) = pts[(i + 1) % n];
            RoutePose::new(i, pts[i].0, pts[i].1, (by - ay).atan2(bx - ax))
        })
        .collect())
}
