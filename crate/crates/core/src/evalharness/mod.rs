//! Deployment of trained policies and the three robustness studies: plain
//! deployment statistics, appearance-shift sweeps and odometry-noise sweeps.
//!
//! Episodes are pre-sampled from the seed before any agent runs, so two
//! agents (or two perturbations) deployed with the same seed face exactly the
//! same start/goal pairs.

mod report;
mod stats;

pub use report::{
    export_stats, export_sweep, load_stats, render_svg, stats_from_json, stats_to_json, sweep_points_from_json, SWEEP_HEADER,
};
pub use stats::{EpisodeOutcome, SeedStats, SuccessStats, SweepPoint, SweepResult};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::DeployMode;
use crate::error::{Error, Result};
use crate::percept::{AppearanceShift, NoiseModel};
use crate::policynet::{forward_step, greedy_action, sample_action, Hidden, StepBatch};
use crate::ppo::CurriculumConfig;
use crate::routeworld::{sample_episode, Action, CurriculumLevel, EpisodeState, NavEnv, Observation, N_ACTIONS};
use crate::scenario::{Perturbation, Scenario};
use crate::Params;

/// A controller deployed on a batch of episodes run in lockstep.
pub trait DeployAgent {
    /// Starts `batch` fresh episodes.
    fn begin(&mut self, scenario: &Scenario, batch: usize) -> Result<()>;

    /// Picks an action for each still-running episode. `rows` are the batch
    /// indices of those episodes, aligned with `obs`, `states` and `rngs`.
    fn act(
        &mut self,
        rows: &[usize],
        obs: &[&Observation],
        states: &[&EpisodeState],
        rngs: &mut [&mut ChaCha8Rng],
    ) -> Result<Vec<Action>>;
}

/// The trained network.
pub struct NetAgent<'a> {
    params: &'a Params,
    mode: DeployMode,
    hidden: Hidden<f32>,
}

impl<'a> NetAgent<'a> {
    pub fn new(params: &'a Params, mode: DeployMode) -> Self {
        Self { params, mode, hidden: Hidden::zeros(0, params.dims.hidden) }
    }
}

impl DeployAgent for NetAgent<'_> {
    fn begin(&mut self, scenario: &Scenario, batch: usize) -> Result<()> {
        let d = &self.params.dims;
        if d.goal_modality != scenario.env.goal_modality {
            return Err(Error::Shape(format!(
                "network expects {} goals, environment provides {}",
                d.goal_modality.as_str(),
                scenario.env.goal_modality.as_str()
            )));
        }
        if d.mask.visual && d.d_visual != scenario.feature_dim() {
            return Err(Error::Shape(format!(
                "network expects {}-d embeddings, environment provides {}",
                d.d_visual,
                scenario.feature_dim()
            )));
        }
        self.hidden = Hidden::zeros(batch, d.hidden);
        Ok(())
    }

    fn act(
        &mut self,
        rows: &[usize],
        obs: &[&Observation],
        _states: &[&EpisodeState],
        rngs: &mut [&mut ChaCha8Rng],
    ) -> Result<Vec<Action>> {
        let input = StepBatch::from_observations(&self.params.dims, obs)?;
        let state = Hidden::stack(&rows.iter().map(|&r| self.hidden.row(r)).collect::<Vec<_>>());
        let (out, next, _) = forward_step(self.params, &input, &state)?;
        let mut actions = Vec::with_capacity(rows.len());
        for (i, &r) in rows.iter().enumerate() {
            self.hidden.h.row_mut(r).copy_from_slice(next.h.row(i));
            self.hidden.c.row_mut(r).copy_from_slice(next.c.row(i));
            let logits = out.logits.row(i);
            let a = match self.mode {
                DeployMode::Greedy => greedy_action(logits)?,
                DeployMode::Stochastic => sample_action(logits, &mut *rngs[i])?.action,
            };
            actions.push(Action::from_index(a)?);
        }
        Ok(actions)
    }
}

/// Follows the shortest path using the true position; an upper bound.
#[derive(Debug, Default)]
pub struct OracleAgent {
    graph: Option<std::sync::Arc<crate::routeworld::RouteGraph>>,
}

impl DeployAgent for OracleAgent {
    fn begin(&mut self, scenario: &Scenario, _batch: usize) -> Result<()> {
        self.graph = Some(std::sync::Arc::clone(&scenario.graph));
        Ok(())
    }

    fn act(
        &mut self,
        _rows: &[usize],
        _obs: &[&Observation],
        states: &[&EpisodeState],
        _rngs: &mut [&mut ChaCha8Rng],
    ) -> Result<Vec<Action>> {
        let graph = self.graph.as_ref().ok_or_else(|| Error::InvalidInput("oracle used before begin".into()))?;
        Ok(states.iter().map(|s| graph.shortest_path_action(s.current_node, s.goal_node)).collect())
    }
}

/// Uniformly random actions.
#[derive(Debug, Default)]
pub struct RandomAgent;

impl DeployAgent for RandomAgent {
    fn begin(&mut self, _scenario: &Scenario, _batch: usize) -> Result<()> {
        Ok(())
    }

    fn act(
        &mut self,
        rows: &[usize],
        _obs: &[&Observation],
        _states: &[&EpisodeState],
        rngs: &mut [&mut ChaCha8Rng],
    ) -> Result<Vec<Action>> {
        (0..rows.len()).map(|i| Action::from_index(rngs[i].random_range(0..N_ACTIONS))).collect()
    }
}

/// Goal-distance range used for deployment: the top curriculum level.
pub fn deployment_level(scenario: &Scenario, curriculum: &CurriculumConfig) -> Result<CurriculumLevel> {
    let schedule = curriculum.schedule(scenario.graph.diameter())?;
    CurriculumLevel::new(1, *schedule.last().expect("schedule is never empty"))
}

/// Start/goal pairs for one seed, independent of any agent or perturbation.
pub fn sample_episodes(
    scenario: &Scenario,
    level: CurriculumLevel,
    n_episodes: usize,
    seed: u64,
) -> Result<Vec<EpisodeState>> {
    if n_episodes == 0 {
        return Err(Error::InvalidInput("n_episodes must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_episodes).map(|_| sample_episode(&scenario.graph, &scenario.env.horizon, level, &mut rng)).collect()
}

/// Deployment request: where, under which perturbation, and how many
/// episodes per seed.
#[derive(Debug, Clone)]
pub struct DeploySpec<'a> {
    pub scenario: &'a Scenario,
    pub level: CurriculumLevel,
    pub perturbation: Perturbation,
    pub n_episodes: usize,
}

impl<'a> DeploySpec<'a> {
    /// Clean deployment at the top curriculum level.
    pub fn new(scenario: &'a Scenario, curriculum: &CurriculumConfig, n_episodes: usize) -> Result<Self> {
        Ok(Self { scenario, level: deployment_level(scenario, curriculum)?, perturbation: Perturbation::none(), n_episodes })
    }

    pub fn with_perturbation(&self, perturbation: Perturbation) -> Self {
        Self { perturbation, ..self.clone() }
    }
}

/// Runs `spec.n_episodes` episodes sampled from `seed` and returns their
/// outcomes, sorted by episode index.
pub fn run_episodes<A: DeployAgent + ?Sized>(agent: &mut A, spec: &DeploySpec, seed: u64) -> Result<Vec<EpisodeOutcome>> {
    let scenario = spec.scenario;
    let episodes = sample_episodes(scenario, spec.level, spec.n_episodes, seed)?;
    let sensors = scenario.sensors(&spec.perturbation)?.sensors;
    let mut envs = scenario.make_envs(episodes.len(), &sensors)?;
    let mut rngs: Vec<ChaCha8Rng> = (0..episodes.len())
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(i as u64 + 1);
            r
        })
        .collect();
    let mut obs = Vec::with_capacity(episodes.len());
    for (env, ep) in envs.iter_mut().zip(&episodes) {
        obs.push(env.reset_to(ep.start_node, ep.goal_node)?);
    }
    agent.begin(scenario, episodes.len())?;

    let mut outcomes: Vec<Option<EpisodeOutcome>> = vec![None; episodes.len()];
    loop {
        let rows: Vec<usize> = (0..envs.len()).filter(|&i| outcomes[i].is_none() && !done(&envs[i])).collect();
        for i in 0..envs.len() {
            if outcomes[i].is_none() && done(&envs[i]) {
                outcomes[i] = Some(outcome(seed, i, &envs[i], false));
            }
        }
        if rows.is_empty() {
            break;
        }
        let obs_refs: Vec<&Observation> = rows.iter().map(|&r| &obs[r]).collect();
        let states: Vec<&EpisodeState> = rows.iter().map(|&r| envs[r].state().expect("episode started")).collect();
        let mut active = vec![false; envs.len()];
        rows.iter().for_each(|&r| active[r] = true);
        let mut rng_refs: Vec<&mut ChaCha8Rng> =
            rngs.iter_mut().zip(&active).filter(|(_, &a)| a).map(|(r, _)| r).collect();
        let actions = agent.act(&rows, &obs_refs, &states, &mut rng_refs)?;
        if actions.len() != rows.len() {
            return Err(Error::Shape(format!("agent returned {} actions for {} episodes", actions.len(), rows.len())));
        }
        for (&r, a) in rows.iter().zip(actions) {
            let res = envs[r].step(a)?;
            obs[r] = res.observation;
            if res.done {
                outcomes[r] = Some(outcome(seed, r, &envs[r], res.info.reached_goal));
            }
        }
    }
    Ok(outcomes.into_iter().map(|o| o.expect("every episode finished")).collect())
}

fn done(env: &NavEnv) -> bool {
    env.state().is_none_or(|s| s.done)
}

fn outcome(seed: u64, index: usize, env: &NavEnv, success: bool) -> EpisodeOutcome {
    let s = env.state().expect("episode started");
    EpisodeOutcome {
        seed,
        index,
        start: s.start_node,
        goal: s.goal_node,
        geodesic: env.graph.geodesic_unchecked(s.start_node, s.goal_node),
        success: success || s.current_node == s.goal_node,
        steps: s.steps_taken,
    }
}

/// Deploys on every seed and aggregates the outcomes.
pub fn deploy<A: DeployAgent + ?Sized>(agent: &mut A, spec: &DeploySpec, seeds: &[u64]) -> Result<SuccessStats> {
    if seeds.is_empty() {
        return Err(Error::InvalidInput("at least one deployment seed is required".into()));
    }
    let mut log = Vec::with_capacity(seeds.len() * spec.n_episodes);
    for &seed in seeds {
        log.extend(run_episodes(agent, spec, seed)?);
    }
    SuccessStats::from_outcomes(log)
}

fn check_increasing(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidInput(format!("empty {what} grid")));
    }
    if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(format!("{what} grid must be finite and strictly increasing")));
    }
    Ok(())
}

/// Deploys under each appearance shift. Goal embeddings and odometry stay in
/// training conditions; only the current-frame embeddings change.
pub fn appearance_sweep<A: DeployAgent + ?Sized>(
    agent: &mut A,
    spec: &DeploySpec,
    shifts: &[AppearanceShift],
    seeds: &[u64],
) -> Result<SweepResult> {
    let severities: Vec<f64> = shifts.iter().map(|s| s.severity).collect();
    check_increasing(&severities, "severity")?;
    if severities.iter().any(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::InvalidInput("severities must lie in [0, 1]".into()));
    }
    let mut points = Vec::with_capacity(shifts.len());
    for shift in shifts {
        let p = Perturbation { appearance: (shift.severity > 0.0).then_some(*shift), ..spec.perturbation };
        let ate_m = spec.scenario.sensors(&p)?.ate;
        let stats = deploy(agent, &spec.with_perturbation(p), seeds)?;
        points.push(SweepPoint { param: shift.severity, ate_m, stats });
    }
    Ok(SweepResult { param_name: "severity".into(), points })
}

/// Scalar size of a noise model used as the sweep parameter.
pub fn noise_magnitude(m: &NoiseModel) -> f64 {
    (m.sigma_d * m.sigma_d + m.sigma_theta * m.sigma_theta + m.bias_scale * m.bias_scale).sqrt()
}

/// Deploys with motion states rebuilt from odometry corrupted by each model
/// (one corruption per model, seeded by `noise_seed`) and records the ATE of
/// the resulting track.
pub fn noise_sweep<A: DeployAgent + ?Sized>(
    agent: &mut A,
    spec: &DeploySpec,
    grid: &[NoiseModel],
    noise_seed: u64,
    seeds: &[u64],
) -> Result<SweepResult> {
    for m in grid {
        m.validate()?;
    }
    let params: Vec<f64> = grid.iter().map(noise_magnitude).collect();
    check_increasing(&params, "noise")?;
    let mut points = Vec::with_capacity(grid.len());
    for (m, &param) in grid.iter().zip(&params) {
        let p = Perturbation { noise: (!m.is_zero()).then_some(*m), noise_seed, ..spec.perturbation };
        let ate_m = spec.scenario.sensors(&p)?.ate;
        let stats = deploy(agent, &spec.with_perturbation(p), seeds)?;
        points.push(SweepPoint { param, ate_m, stats });
    }
    Ok(SweepResult { param_name: "noise".into(), points })
}
