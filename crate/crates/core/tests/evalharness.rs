mod common;

use odonav::config::DeployMode;
use odonav::evalharness::{
    appearance_sweep, deploy, export_stats, export_sweep, load_stats, noise_sweep, run_episodes, sample_episodes,
    stats_from_json, stats_to_json, sweep_points_from_json, DeploySpec, NetAgent, OracleAgent, RandomAgent,
    SWEEP_HEADER,
};
use odonav::percept::{AppearanceShift, GoalModality, NoiseModel};
use odonav::policynet::{init_params, ChannelMask, NetDims};
use odonav::ppo::CurriculumConfig;
use odonav::routeworld::{CurriculumLevel, EnvConfig};
use odonav::scenario::Scenario;
use odonav::{Error, Params};

fn scenario(nodes: usize, modality: GoalModality) -> Scenario {
    Scenario::synthetic(nodes, 16, 4, 3, EnvConfig { goal_modality: modality, ..Default::default() }).unwrap()
}

fn net(mask: ChannelMask, modality: GoalModality, seed: u64) -> Params {
    init_params(NetDims::new(16, modality, mask).with_sizes(16, 16), &mut common::rng(seed)).unwrap()
}

fn shifts() -> Vec<AppearanceShift> {
    [0.0, 0.5, 1.0].iter().map(|&s| AppearanceShift::new(s, 7)).collect()
}

fn noise_grid() -> Vec<NoiseModel> {
    [0.0, 0.5, 1.0]
        .iter()
        .map(|&k| NoiseModel { sigma_d: 0.2 * k, sigma_theta: 0.1 * k, bias_scale: 0.1 * k })
        .collect()
}

#[test]
fn oracle_is_perfect_and_efficient() {
    let sc = scenario(120, GoalModality::Both);
    let spec = DeploySpec::new(&sc, &CurriculumConfig::default(), 100).unwrap();
    let s = deploy(&mut OracleAgent::default(), &spec, &[0, 1, 2]).unwrap();
    assert_eq!((s.episodes, s.successes, s.success_rate), (300, 300, 1.0));
    assert!((s.efficiency - 1.0).abs() < 1e-12);
    assert_eq!(s.per_seed.len(), 3);
}

#[test]
fn random_agent_rarely_succeeds_on_long_routes() {
    let sc = scenario(200, GoalModality::Visual);
    let spec = DeploySpec::new(&sc, &CurriculumConfig::default(), 500).unwrap();
    let s = deploy(&mut RandomAgent, &spec, &[0]).unwrap();
    assert!(s.success_rate < 0.2, "random success {}", s.success_rate);
    if s.successes > 0 {
        assert!(s.efficiency > 0.0 && s.efficiency <= 1.0);
    }
}

#[test]
fn deployment_is_deterministic() {
    let sc = scenario(60, GoalModality::Both);
    let p = net(ChannelMask::FULL, GoalModality::Both, 1);
    let spec = DeploySpec::new(&sc, &CurriculumConfig::default(), 40).unwrap();
    for mode in [DeployMode::Greedy, DeployMode::Stochastic] {
        let a = run_episodes(&mut NetAgent::new(&p, mode), &spec, 5).unwrap();
        let b = run_episodes(&mut NetAgent::new(&p, mode), &spec, 5).unwrap();
        assert_eq!(a, b);
    }
    let a = sample_episodes(&sc, spec.level, 40, 5).unwrap();
    let b = sample_episodes(&sc, spec.level, 40, 6).unwrap();
    assert_ne!(a, b);
}

#[test]
fn episodes_share_start_goal_pairs_across_agents() {
    let sc = scenario(60, GoalModality::Both);
    let spec = DeploySpec::new(&sc, &CurriculumConfig::default(), 30).unwrap();
    let a = run_episodes(&mut OracleAgent::default(), &spec, 9).unwrap();
    let b = run_episodes(&mut RandomAgent, &spec, 9).unwrap();
    let pairs = |o: &[odonav::evalharness::EpisodeOutcome]| o.iter().map(|e| (e.start, e.goal)).collect::<Vec<_>>();
    assert_eq!(pairs(&a), pairs(&b));
    let level = spec.level;
    assert!(a.iter().all(|e| e.geodesic >= level.min_distance && e.geodesic <= level.max_distance));
}

#[test]
fn invalid_requests_are_rejected() {
    let sc = scenario(40, GoalModality::Visual);
    let spec = DeploySpec::new(&sc, &CurriculumConfig::default(), 0).unwrap();
    assert!(matches!(deploy(&mut RandomAgent, &spec, &[0]), Err(Error::InvalidInput(_))));
    let spec = DeploySpec::new(&sc, &CurriculumConfig::default(), 5).unwrap();
    assert!(matches!(deploy(&mut RandomAgent, &spec, &[]), Err(Error::InvalidInput(_))));

    let wide = init_params(NetDims::new(32, GoalModality::Visual, ChannelMask::FULL).with_sizes(8, 8), &mut common::rng(0))
        .unwrap();
    assert!(matches!(deploy(&mut NetAgent::new(&wide, DeployMode::Greedy), &spec, &[0]), Err(Error::Shape(_))));
    let pose = net(ChannelMask::FULL, GoalModality::Pose, 0);
    assert!(matches!(deploy(&mut NetAgent::new(&pose, DeployMode::Greedy), &spec, &[0]), Err(Error::Shape(_))));

    let bad: Vec<AppearanceShift> = [0.5, 0.2].iter().map(|&s| AppearanceShift::new(s, 1)).collect();
    assert!(matches!(appearance_sweep(&mut RandomAgent, &spec, &bad, &[0]), Err(Error::InvalidInput(_))));
    let mut grid = noise_grid();
    grid.reverse();
    assert!(matches!(noise_sweep(&mut RandomAgent, &spec, &grid, 1, &[0]), Err(Error::InvalidInput(_))));
}

#[test]
fn zero_perturbation_points_match_plain_deployment() {
    let sc = scenario(60, GoalModality::Both);
    let p = net(ChannelMask::FULL, GoalModality::Both, 2);
    let spec = DeploySpec::new(&sc, &CurriculumConfig::default(), 30).unwrap();
    let seeds = [0, 1];
    let clean = deploy(&mut NetAgent::new(&p, DeployMode::Stochastic), &spec, &seeds).unwrap();
    let app = appearance_sweep(&mut NetAgent::new(&p, DeployMode::Stochastic), &spec, &shifts(), &seeds).unwrap();
    let noi = noise_sweep(&mut NetAgent::new(&p, DeployMode::Stochastic), &spec, &noise_grid(), 11, &seeds).unwrap();
    assert_eq!(app.points[0].stats, clean);
    assert_eq!(noi.points[0].stats, clean);
    assert!(noi.points[0].ate_m < 1e-9);
    assert!(noi.points.windows(2).all(|w| w[0].param < w[1].param));
    assert!(noi.points[2].ate_m > 0.0);
}

#[test]
fn masked_channels_make_sweeps_flat() {
    let seeds = [0, 1];
    let sc = scenario(60, GoalModality::Pose);
    let motion = net(ChannelMask::MOTION_ONLY, GoalModality::Pose, 3);
    let spec = DeploySpec::new(&sc, &CurriculumConfig::default(), 30).unwrap();
    let sweep = appearance_sweep(&mut NetAgent::new(&motion, DeployMode::Stochastic), &spec, &shifts(), &seeds).unwrap();
    assert!(sweep.points.iter().all(|pt| pt.stats == sweep.points[0].stats));

    let sc = scenario(60, GoalModality::Visual);
    let vision = net(ChannelMask::VISION_ONLY, GoalModality::Visual, 4);
    let spec = DeploySpec::new(&sc, &CurriculumConfig::default(), 30).unwrap();
    let sweep = noise_sweep(&mut NetAgent::new(&vision, DeployMode::Stochastic), &spec, &noise_grid(), 11, &seeds).unwrap();
    assert!(sweep.points.iter().all(|pt| pt.stats == sweep.points[0].stats));
}

#[test]
fn level_restricts_deployment_distances() {
    let sc = scenario(80, GoalModality::Visual);
    let mut spec = DeploySpec::new(&sc, &CurriculumConfig::default(), 50).unwrap();
    assert_eq!((spec.level.min_distance, spec.level.max_distance), (1, sc.graph.diameter()));
    spec.level = CurriculumLevel::new(3, 4).unwrap();
    let out = run_episodes(&mut OracleAgent::default(), &spec, 2).unwrap();
    assert!(out.iter().all(|e| (3..=4).contains(&e.geodesic) && e.success && e.steps == e.geodesic));
}

#[test]
fn report_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(60, GoalModality::Both);
    let spec = DeploySpec::new(&sc, &CurriculumConfig::default(), 20).unwrap();
    let stats = deploy(&mut RandomAgent, &spec, &[0, 1, 2]).unwrap();
    let path = export_stats(&stats, dir.path()).unwrap();
    assert_eq!(load_stats(&path).unwrap(), stats);
    assert_eq!(stats_from_json(&stats_to_json(&stats)).unwrap(), stats);
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!(value.as_object().unwrap().values().all(|v| v.is_number()));

    let grid: Vec<AppearanceShift> =
        [0.0, 0.2, 0.4, 0.6, 0.8, 1.0].iter().map(|&s| AppearanceShift::new(s, 7)).collect();
    let sweep = appearance_sweep(&mut OracleAgent::default(), &spec, &grid, &[0]).unwrap();
    let sweep_dir = dir.path().join("sweep");
    export_sweep(&sweep, &sweep_dir).unwrap();

    let csv = std::fs::read_to_string(sweep_dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 7);
    assert_eq!(lines[0], SWEEP_HEADER);
    for (line, pt) in lines[1..].iter().zip(&sweep.points) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols.len(), 5);
        assert_eq!(cols[0], pt.param);
        assert_eq!(cols[2], pt.stats.success_rate);
    }

    let back = sweep_points_from_json(&std::fs::read_to_string(sweep_dir.join("stats.json")).unwrap()).unwrap();
    assert_eq!(back.len(), 6);
    for ((param, ate, stats), pt) in back.iter().zip(&sweep.points) {
        assert_eq!((*param, *ate, stats), (pt.param, pt.ate_m, &pt.stats));
    }

    let svg = std::fs::read_to_string(sweep_dir.join("sweep.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    assert!(doc.descendants().any(|n| n.has_tag_name("polyline") || n.has_tag_name("path")));
}
