mod common;

use std::collections::VecDeque;
use std::sync::Arc;

use odonav::percept::GoalModality;
use odonav::routeworld::{
    build_route, sample_episode, Action, CurriculumLevel, EnvConfig, HorizonPolicy, NavEnv, RouteGraph, RoutePose,
};
use odonav::scenario::{Perturbation, Scenario};
use odonav::Error;
use proptest::prelude::*;
use rand::Rng;

fn line(n: usize) -> Vec<RoutePose> {
    (0..n).map(|i| RoutePose::new(i, i as f64, 0.0, 0.0)).collect()
}

fn bfs(g: &RouteGraph, a: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.len()];
    dist[a] = 0;
    let mut q = VecDeque::from([a]);
    while let Some(u) = q.pop_front() {
        for &v in &g.adjacency[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                q.push_back(v);
            }
        }
    }
    dist
}

fn env(scenario: &Scenario) -> NavEnv {
    let sensors = scenario.sensors(&Perturbation::none()).unwrap().sensors;
    NavEnv::new(Arc::clone(&scenario.graph), sensors, scenario.env).unwrap()
}

#[test]
fn geodesic_examples() {
    let chain = build_route(&line(10), false).unwrap();
    assert_eq!(chain.geodesic(2, 7).unwrap(), 5);
    let ring = build_route(&line(10), true).unwrap();
    assert_eq!(ring.geodesic(0, 9).unwrap(), 1);
    assert_eq!(ring.geodesic(4, 4).unwrap(), 0);
    assert!(matches!(ring.geodesic(0, 10), Err(Error::OutOfRange { index: 10, len: 10 })));
}

#[test]
fn extent_is_max_pairwise_distance() {
    let g = build_route(&line(7), false).unwrap();
    assert!((g.extent - 6.0).abs() < 1e-12);
}

#[test]
fn adjacency_is_symmetric() {
    for is_loop in [false, true] {
        let g = build_route(&line(12), is_loop).unwrap();
        for (u, nb) in g.adjacency.iter().enumerate() {
            for &v in nb {
                assert!(g.adjacency[v].contains(&u));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn geodesic_matches_bfs(n in 2usize..=50, is_loop: bool) {
        let g = build_route(&line(n), is_loop).unwrap();
        for a in 0..n {
            let d = bfs(&g, a);
            for b in 0..n {
                prop_assert_eq!(g.geodesic(a, b).unwrap(), d[b]);
            }
        }
    }

    #[test]
    fn geodesic_triangle_inequality(n in 2usize..=60, is_loop: bool, a in 0usize..60, b in 0usize..60, c in 0usize..60) {
        let g = build_route(&line(n), is_loop).unwrap();
        let (a, b, c) = (a % n, b % n, c % n);
        let d = |x, y| g.geodesic(x, y).unwrap();
        prop_assert!(d(a, c) <= d(a, b) + d(b, c));
        prop_assert_eq!(d(a, b), d(b, a));
    }

    #[test]
    fn shortest_path_actions_reach_goal_in_geodesic_steps(n in 2usize..=40, is_loop: bool, s in 0usize..40, t in 0usize..40) {
        let g = build_route(&line(n), is_loop).unwrap();
        let (s, t) = (s % n, t % n);
        let mut node = s;
        let mut steps = 0;
        while node != t {
            let next = g.transition(node, g.shortest_path_action(node, t));
            prop_assert!(g.geodesic(node, next).unwrap() <= 1);
            node = next;
            steps += 1;
            prop_assert!(steps <= n);
        }
        prop_assert_eq!(steps, g.geodesic(s, t).unwrap());
    }

    #[test]
    fn transitions_are_local(n in 2usize..=30, is_loop: bool, node in 0usize..30, a in 0usize..3) {
        let g = build_route(&line(n), is_loop).unwrap();
        let node = node % n;
        let next = g.transition(node, Action::from_index(a).unwrap());
        prop_assert!(g.geodesic(node, next).unwrap() <= 1);
    }

    #[test]
    fn sampled_goals_respect_level(seed: u64, lo in 1usize..6, span in 0usize..10) {
        let g = build_route(&line(25), false).unwrap();
        let level = CurriculumLevel::new(lo, lo + span).unwrap();
        let mut rng = common::rng(seed);
        let st = sample_episode(&g, &HorizonPolicy::default(), level, &mut rng).unwrap();
        let d = g.geodesic(st.start_node, st.goal_node).unwrap();
        prop_assert!(d >= lo && d <= lo + span);
        prop_assert_eq!(st.horizon, HorizonPolicy::default().horizon(d));
    }
}

/// Chi-square goodness of fit of the goal distance against the uniform law on
/// `[1, ⌊N/2⌋]`. On an odd loop every distance has exactly two nodes, so a
/// uniform goal node gives a uniform distance.
#[test]
fn goal_distance_uniform_on_loop() {
    let n = 21;
    let g = build_route(&line(n), true).unwrap();
    let level = CurriculumLevel::new(1, n).unwrap();
    let mut rng = common::rng(17);
    let k = n / 2;
    let mut counts = vec![0usize; k + 1];
    let draws = 10_000;
    for _ in 0..draws {
        let st = sample_episode(&g, &HorizonPolicy::default(), level, &mut rng).unwrap();
        counts[g.geodesic(st.start_node, st.goal_node).unwrap()] += 1;
    }
    assert_eq!(counts[0], 0);
    let expect = draws as f64 / k as f64;
    let chi2: f64 = counts[1..].iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
    // 99.9% quantile of chi-square with 9 degrees of freedom.
    assert!(chi2 < 27.88, "chi2 = {chi2}, counts = {counts:?}");
}

#[test]
fn starts_cover_every_node_on_loop() {
    let g = build_route(&line(15), true).unwrap();
    let level = CurriculumLevel::new(1, 3).unwrap();
    let mut rng = common::rng(5);
    let mut seen = [false; 15];
    for _ in 0..2000 {
        seen[sample_episode(&g, &HorizonPolicy::default(), level, &mut rng).unwrap().start_node] = true;
    }
    assert!(seen.iter().all(|&s| s));
}

#[test]
fn reset_is_deterministic() {
    let sc = Scenario::synthetic(40, 8, 3, 2, EnvConfig::default()).unwrap();
    let level = CurriculumLevel::new(1, 20).unwrap();
    let run = |seed| {
        let mut e = env(&sc);
        let mut rng = common::rng(seed);
        let mut trace = Vec::new();
        for _ in 0..20 {
            e.reset(level, &mut rng).unwrap();
            let st = *e.state().unwrap();
            trace.push((st.start_node, st.goal_node));
            while !e.state().unwrap().done {
                let a = Action::from_index(rng.random_range(0..3)).unwrap();
                let r = e.step(a).unwrap();
                trace.push((r.observation.motion.0[0].to_bits() as usize, r.reward.to_bits() as usize));
            }
        }
        trace
    };
    assert_eq!(run(3), run(3));
    assert_ne!(run(3), run(4));
}

#[test]
fn goal_hit_stay_and_timeout() {
    let poses = line(10);
    let sc = Scenario::new(build_route(&poses, false).unwrap(), None, EnvConfig {
        goal_modality: GoalModality::Pose,
        ..Default::default()
    })
    .unwrap();
    let mut e = env(&sc);

    e.reset_to(4, 5).unwrap();
    let r = e.step(Action::Forward).unwrap();
    assert_eq!((r.reward, r.done, r.info.reached_goal, r.info.geodesic_to_goal), (1.0, true, true, 0));
    assert!(matches!(e.step(Action::Stay), Err(Error::EpisodeFinished)));

    e.reset_to(2, 8).unwrap();
    let horizon = e.state().unwrap().horizon;
    assert_eq!(horizon, 50);
    let mut ret = 0.0;
    for t in 0..horizon {
        let r = e.step(Action::Stay).unwrap();
        assert_eq!(e.state().unwrap().current_node, 2);
        ret += r.reward;
        assert_eq!(r.done, t + 1 == horizon);
    }
    assert_eq!(ret, 0.0);
}

#[test]
fn returns_are_zero_or_one() {
    let sc = Scenario::synthetic(30, 8, 3, 9, EnvConfig::default()).unwrap();
    let mut e = env(&sc);
    let mut rng = common::rng(1);
    let level = CurriculumLevel::new(1, 3).unwrap();
    for _ in 0..200 {
        e.reset(level, &mut rng).unwrap();
        let mut ret = 0.0;
        let mut steps = 0;
        while !e.state().unwrap().done {
            let r = e.step(Action::from_index(rng.random_range(0..3)).unwrap()).unwrap();
            assert!(r.reward == 0.0 || r.reward == 1.0);
            assert_eq!(r.reward == 1.0, r.info.reached_goal);
            ret += r.reward;
            steps += 1;
        }
        assert!(ret == 0.0 || ret == 1.0);
        assert!(steps <= e.state().unwrap().horizon);
    }
}

#[test]
fn observations_are_finite_and_shaped() {
    for modality in [GoalModality::Visual, GoalModality::Pose, GoalModality::Both] {
        let sc = Scenario::synthetic(50, 16, 4, 3, EnvConfig { goal_modality: modality, ..Default::default() }).unwrap();
        let mut e = env(&sc);
        let obs = e.reset_to(3, 20).unwrap();
        assert_eq!(obs.goal.len(), modality.dim(16));
        assert_eq!(obs.prev_action, [0.0; 3]);
        assert!(obs.goal.iter().all(|v| v.is_finite()));
        let r = e.step(Action::Backward).unwrap();
        assert_eq!(r.observation.prev_action, [0.0, 1.0, 0.0]);
        assert!(r.observation.motion.0.iter().all(|v| v.is_finite()));
        assert_eq!(r.observation.visual.as_ref().unwrap().len(), 16);
    }
}
