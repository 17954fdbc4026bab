//! Experiment configuration: UTF-8 `key = value` lines with dotted section
//! keys. `#` starts a comment; unknown keys are rejected.
//!
//! ```text
//! route.nodes = 200
//! net.mask = full
//! ppo.lr = 1e-3
//! run.seeds = 0,1,2
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::percept::{load_fmat, read_route_poses, synth_route_features, AppearanceShift, NoiseModel};
use crate::policynet::{ChannelMask, NetDims, DEFAULT_ENCODER_UNITS, DEFAULT_HIDDEN_UNITS};
use crate::ppo::{CurriculumConfig, PpoConfig};
use crate::routeworld::{build_route, synth_loop_poses, EnvConfig};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq)]
pub enum RouteSource {
    Synthetic { nodes: usize, seed: u64 },
    File { path: PathBuf, is_loop: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureSource {
    Synthetic { dim: usize, smooth_l: usize, seed: u64 },
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeployMode {
    #[default]
    Greedy,
    Stochastic,
}

impl DeployMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DeployMode::Greedy => "greedy",
            DeployMode::Stochastic => "stochastic",
        }
    }
}

impl std::str::FromStr for DeployMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(DeployMode::Greedy),
            "stochastic" => Ok(DeployMode::Stochastic),
            other => Err(Error::InvalidParameter(format!("unknown deploy mode {other:?}"))),
        }
    }
}

/// Deployment and sweep settings.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub episodes: usize,
    pub mode: DeployMode,
    pub severities: Vec<f64>,
    pub shift_global_fraction: f64,
    pub shift_seed: u64,
    /// Noise grid: `scale · base` for each scale.
    pub noise_scales: Vec<f64>,
    pub noise_base: NoiseModel,
    pub noise_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            episodes: 100,
            mode: DeployMode::Greedy,
            severities: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            shift_global_fraction: 0.5,
            shift_seed: 7,
            noise_scales: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            noise_base: NoiseModel { sigma_d: 0.4, sigma_theta: 0.2, bias_scale: 0.2 },
            noise_seed: 11,
        }
    }
}

impl EvalConfig {
    pub fn shifts(&self) -> Vec<AppearanceShift> {
        self.severities
            .iter()
            .map(|&s| AppearanceShift { severity: s, global_fraction: self.shift_global_fraction, seed: self.shift_seed })
            .collect()
    }

    pub fn noise_grid(&self) -> Vec<NoiseModel> {
        let b = self.noise_base;
        self.noise_scales
            .iter()
            .map(|&k| NoiseModel { sigma_d: k * b.sigma_d, sigma_theta: k * b.sigma_theta, bias_scale: k * b.bias_scale })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub route: RouteSource,
    pub features: FeatureSource,
    pub mask: ChannelMask,
    pub encoder_units: usize,
    pub hidden_units: usize,
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    pub curriculum: CurriculumConfig,
    pub eval: EvalConfig,
    pub out_dir: PathBuf,
    pub seeds: Vec<u64>,
    /// Periodic checkpoint interval in episodes; 0 disables.
    pub checkpoint_every: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            route: RouteSource::Synthetic { nodes: 200, seed: 1 },
            features: FeatureSource::Synthetic { dim: 64, smooth_l: 5, seed: 2 },
            mask: ChannelMask::FULL,
            encoder_units: DEFAULT_ENCODER_UNITS,
            hidden_units: DEFAULT_HIDDEN_UNITS,
            env: EnvConfig::default(),
            ppo: PpoConfig::default(),
            curriculum: CurriculumConfig::default(),
            eval: EvalConfig::default(),
            out_dir: PathBuf::from("out"),
            seeds: vec![0, 1, 2, 3, 4, 5],
            checkpoint_every: 0,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Splits `key = value` (or `key=value`).
pub fn split_assignment(line: &str) -> Result<(&str, &str)> {
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("expected `key = value`, got {line:?}")))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(Error::Config(format!("empty key in {line:?}")));
    }
    Ok((k, v.trim()))
}

impl ExperimentConfig {
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = split_assignment(line)?;
            cfg.set(k, v).map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
        }
        Ok(cfg)
    }

    /// Reads and validates a config file; relative data paths resolve
    /// against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let RouteSource::File { path: p, .. } = &mut cfg.route {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let FeatureSource::File(p) = &mut cfg.features {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Rebuilds a config from `key=value` pairs such as a checkpoint echo.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = split_assignment(assignment)?;
        self.set(k, v)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value;
        match key {
            "route.nodes" | "route.seed" => {
                let (mut nodes, mut seed) = match self.route {
                    RouteSource::Synthetic { nodes, seed } => (nodes, seed),
                    RouteSource::File { .. } => (200, 1),
                };
                if key == "route.nodes" {
                    nodes = parse(key, v)?;
                } else {
                    seed = parse(key, v)?;
                }
                self.route = RouteSource::Synthetic { nodes, seed };
            }
            "route.path" => {
                let is_loop = matches!(self.route, RouteSource::File { is_loop: true, .. });
                self.route = RouteSource::File { path: PathBuf::from(v), is_loop };
            }
            "route.loop" => {
                let flag: bool = parse(key, v)?;
                match &mut self.route {
                    RouteSource::File { is_loop, .. } => *is_loop = flag,
                    RouteSource::Synthetic { .. } if !flag => {
                        return Err(Error::Config("synthetic routes are always loops".into()))
                    }
                    RouteSource::Synthetic { .. } => {}
                }
            }
            "features.dim" | "features.smooth_l" | "features.seed" => {
                let (mut dim, mut smooth_l, mut seed) = match self.features {
                    FeatureSource::Synthetic { dim, smooth_l, seed } => (dim, smooth_l, seed),
                    FeatureSource::File(_) => (64, 5, 2),
                };
                match key {
                    "features.dim" => dim = parse(key, v)?,
                    "features.smooth_l" => smooth_l = parse(key, v)?,
                    _ => seed = parse(key, v)?,
                }
                self.features = FeatureSource::Synthetic { dim, smooth_l, seed };
            }
            "features.path" => self.features = FeatureSource::File(PathBuf::from(v)),
            "net.mask" => self.mask = parse(key, v)?,
            "net.goal_modality" => self.env.goal_modality = parse(key, v)?,
            "net.encoder_units" => self.encoder_units = parse(key, v)?,
            "net.hidden_units" => self.hidden_units = parse(key, v)?,
            "env.horizon_min" => self.env.horizon.min_steps = parse(key, v)?,
            "env.horizon_per_distance" => self.env.horizon.per_distance = parse(key, v)?,
            "ppo.gamma" => self.ppo.gamma = parse(key, v)?,
            "ppo.gae_lambda" => self.ppo.gae_lambda = parse(key, v)?,
            "ppo.clip" => self.ppo.clip = parse(key, v)?,
            "ppo.value_coef" => self.ppo.value_coef = parse(key, v)?,
            "ppo.entropy_coef" => self.ppo.entropy_coef = parse(key, v)?,
            "ppo.lr" => self.ppo.lr = parse(key, v)?,
            "ppo.adam_beta1" => self.ppo.adam_beta1 = parse(key, v)?,
            "ppo.adam_beta2" => self.ppo.adam_beta2 = parse(key, v)?,
            "ppo.adam_eps" => self.ppo.adam_eps = parse(key, v)?,
            "ppo.rollout_len" => self.ppo.rollout_len = parse(key, v)?,
            "ppo.n_envs" => self.ppo.n_envs = parse(key, v)?,
            "ppo.epochs" => self.ppo.epochs = parse(key, v)?,
            "ppo.chunk_len" => self.ppo.chunk_len = parse(key, v)?,
            "ppo.minibatches" => self.ppo.minibatches = parse(key, v)?,
            "ppo.grad_clip_norm" => self.ppo.grad_clip_norm = parse(key, v)?,
            "ppo.total_episodes" => self.ppo.total_episodes = parse(key, v)?,
            "curriculum.base_distance" => self.curriculum.base_distance = parse(key, v)?,
            "curriculum.max_distance" => {
                self.curriculum.max_distance = match v {
                    "none" | "" => None,
                    _ => Some(parse(key, v)?),
                }
            }
            "curriculum.window" => self.curriculum.window = parse(key, v)?,
            "curriculum.threshold" => self.curriculum.threshold = parse(key, v)?,
            "eval.episodes" => self.eval.episodes = parse(key, v)?,
            "eval.mode" => self.eval.mode = parse(key, v)?,
            "eval.severities" => self.eval.severities = parse_list(key, v)?,
            "eval.shift_global_fraction" => self.eval.shift_global_fraction = parse(key, v)?,
            "eval.shift_seed" => self.eval.shift_seed = parse(key, v)?,
            "eval.noise_scales" => self.eval.noise_scales = parse_list(key, v)?,
            "eval.noise_sigma_d" => self.eval.noise_base.sigma_d = parse(key, v)?,
            "eval.noise_sigma_theta" => self.eval.noise_base.sigma_theta = parse(key, v)?,
            "eval.noise_bias_scale" => self.eval.noise_base.bias_scale = parse(key, v)?,
            "eval.noise_seed" => self.eval.noise_seed = parse(key, v)?,
            "run.out_dir" => self.out_dir = PathBuf::from(v),
            "run.seeds" => self.seeds = parse_list(key, v)?,
            "run.checkpoint_every" => self.checkpoint_every = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Canonical `key=value` pairs; feeding them to [`Self::from_pairs`]
    /// reproduces the config.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out: Vec<(&str, String)> = Vec::new();
        match &self.route {
            RouteSource::Synthetic { nodes, seed } => {
                out.push(("route.nodes", nodes.to_string()));
                out.push(("route.seed", seed.to_string()));
            }
            RouteSource::File { path, is_loop } => {
                out.push(("route.path", path.display().to_string()));
                out.push(("route.loop", is_loop.to_string()));
            }
        }
        match &self.features {
            FeatureSource::Synthetic { dim, smooth_l, seed } => {
                out.push(("features.dim", dim.to_string()));
                out.push(("features.smooth_l", smooth_l.to_string()));
                out.push(("features.seed", seed.to_string()));
            }
            FeatureSource::File(p) => out.push(("features.path", p.display().to_string())),
        }
        let p = &self.ppo;
        let c = &self.curriculum;
        let e = &self.eval;
        out.extend([
            ("net.mask", self.mask.name().to_string()),
            ("net.goal_modality", self.env.goal_modality.as_str().to_string()),
            ("net.encoder_units", self.encoder_units.to_string()),
            ("net.hidden_units", self.hidden_units.to_string()),
            ("env.horizon_min", self.env.horizon.min_steps.to_string()),
            ("env.horizon_per_distance", self.env.horizon.per_distance.to_string()),
            ("ppo.gamma", p.gamma.to_string()),
            ("ppo.gae_lambda", p.gae_lambda.to_string()),
            ("ppo.clip", p.clip.to_string()),
            ("ppo.value_coef", p.value_coef.to_string()),
            ("ppo.entropy_coef", p.entropy_coef.to_string()),
            ("ppo.lr", p.lr.to_string()),
            ("ppo.adam_beta1", p.adam_beta1.to_string()),
            ("ppo.adam_beta2", p.adam_beta2.to_string()),
            ("ppo.adam_eps", p.adam_eps.to_string()),
            ("ppo.rollout_len", p.rollout_len.to_string()),
            ("ppo.n_envs", p.n_envs.to_string()),
            ("ppo.epochs", p.epochs.to_string()),
            ("ppo.chunk_len", p.chunk_len.to_string()),
            ("ppo.minibatches", p.minibatches.to_string()),
            ("ppo.grad_clip_norm", p.grad_clip_norm.to_string()),
            ("ppo.total_episodes", p.total_episodes.to_string()),
            ("curriculum.base_distance", c.base_distance.to_string()),
            ("curriculum.max_distance", c.max_distance.map_or("none".into(), |d| d.to_string())),
            ("curriculum.window", c.window.to_string()),
            ("curriculum.threshold", c.threshold.to_string()),
            ("eval.episodes", e.episodes.to_string()),
            ("eval.mode", e.mode.as_str().to_string()),
            ("eval.severities", join(&e.severities)),
            ("eval.shift_global_fraction", e.shift_global_fraction.to_string()),
            ("eval.shift_seed", e.shift_seed.to_string()),
            ("eval.noise_scales", join(&e.noise_scales)),
            ("eval.noise_sigma_d", e.noise_base.sigma_d.to_string()),
            ("eval.noise_sigma_theta", e.noise_base.sigma_theta.to_string()),
            ("eval.noise_bias_scale", e.noise_base.bias_scale.to_string()),
            ("eval.noise_seed", e.noise_seed.to_string()),
            ("run.out_dir", self.out_dir.display().to_string()),
            ("run.seeds", join(&self.seeds)),
            ("run.checkpoint_every", self.checkpoint_every.to_string()),
        ]);
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn to_text(&self) -> String {
        self.echo().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("run.seeds must not be empty".into()));
        }
        if let RouteSource::File { path, .. } = &self.route {
            if !path.is_file() {
                return Err(Error::Config(format!("route file {} does not exist", path.display())));
            }
        }
        if let FeatureSource::File(path) = &self.features {
            if !path.is_file() {
                return Err(Error::Config(format!("feature file {} does not exist", path.display())));
            }
        }
        let mut ppo = self.ppo.clone();
        ppo.seed = self.seeds[0];
        ppo.validate()?;
        self.curriculum.schedule(usize::MAX)?;
        self.net_dims(1).validate()?;
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&self.eval.severities) || !increasing(&self.eval.noise_scales) {
            return Err(Error::Config("sweep grids must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn net_dims(&self, d_visual: usize) -> NetDims {
        NetDims::new(d_visual, self.env.goal_modality, self.mask).with_sizes(self.encoder_units, self.hidden_units)
    }

    /// PPO settings for one run of the seed list.
    pub fn ppo_for_seed(&self, seed: u64) -> PpoConfig {
        PpoConfig { seed, ..self.ppo.clone() }
    }

    pub fn build_scenario(&self) -> Result<Scenario> {
        let graph = match &self.route {
            RouteSource::Synthetic { nodes, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                build_route(&synth_loop_poses(*nodes, &mut rng)?, true)?
            }
            RouteSource::File { path, is_loop } => build_route(&read_route_poses(path)?, *is_loop)?,
        };
        let features = match &self.features {
            FeatureSource::Synthetic { dim, smooth_l, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                synth_route_features(graph.len(), *dim, *smooth_l, &mut rng)?
            }
            FeatureSource::File(path) => load_fmat(path)?,
        };
        Scenario::new(graph, Some(features), self.env)
    }
}
