use std::fs;
use std::path::{Path, PathBuf};

use odonav::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use odonav::config::ExperimentConfig;
use odonav::evalharness::{
    appearance_sweep, deploy as run_deploy, export_stats, export_sweep, noise_sweep, DeploySpec, NetAgent,
};
use odonav::percept::{ingest_kitti_poses, write_fmat, write_odometry, write_route_poses};
use odonav::policynet::PolicyParams;
use odonav::ppo::{train as run_train, CurveWriter, EpisodeRecord, Progress, TrainHooks};
use odonav::{Error, Params, Result};

use crate::Common;

/// `0,1,2` or a half-open range `0..6`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("invalid seed list {s:?}"));
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        (a..b).collect()
    } else {
        s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

fn apply_common(mut cfg: ExperimentConfig, c: &Common) -> Result<ExperimentConfig> {
    for o in &c.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(s) = &c.seed {
        cfg.seeds = parse_seeds(s)?;
    }
    if let Some(out) = &c.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let base = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    apply_common(base, c)
}

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })
}

pub fn gen(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let scenario = cfg.build_scenario()?;
    let out = &cfg.out_dir;
    mkdir(out)?;
    write_route_poses(&scenario.graph.nodes, out.join("route.txt"))?;
    write_fmat(scenario.features.as_deref().expect("config scenarios carry features"), out.join("features.fmat"))?;
    write_odometry(&scenario.odometry, out.join("odometry.txt"))?;
    log::info!("wrote {}-frame route to {}", scenario.graph.len(), out.display());
    Ok(())
}

pub fn ingest(c: &Common, kitti: &Path) -> Result<()> {
    let poses = ingest_kitti_poses(kitti)?;
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from("."));
    mkdir(&out)?;
    write_route_poses(&poses, out.join("route.txt"))?;
    println!("poses={}", poses.len());
    Ok(())
}

struct RunHooks {
    curve: CurveWriter,
    dir: PathBuf,
    echo: Vec<(String, String)>,
    every: usize,
    next_save: usize,
}

impl RunHooks {
    fn save(&self, name: &str, params: &Params, episodes: usize, digest: &str) -> Result<()> {
        let ckpt = Checkpoint::new(params.clone(), episodes as u64, digest, self.echo.clone());
        save_checkpoint(self.dir.join(name), &ckpt)
    }
}

impl TrainHooks<f32> for RunHooks {
    fn on_episode(&mut self, r: &EpisodeRecord) -> Result<()> {
        self.curve.write(r)
    }

    fn on_update(&mut self, params: &PolicyParams<f32>, p: &Progress) -> Result<()> {
        if self.every > 0 && p.episodes >= self.next_save {
            self.save(&format!("ckpt_{:08}.ckpt", p.episodes), params, p.episodes, &p.rng_digest)?;
            while self.next_save <= p.episodes {
                self.next_save += self.every;
            }
        }
        Ok(())
    }

    fn on_failure(&mut self, params: &PolicyParams<f32>, p: &Progress, error: &Error) {
        log::error!("training failed after {} episodes: {error}", p.episodes);
        let _ = self.curve.flush();
        if let Err(e) = self.save("failed.ckpt", params, p.episodes, &p.rng_digest) {
            log::error!("could not write diagnostic checkpoint: {e}");
        }
    }
}

pub fn train(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let scenario = cfg.build_scenario()?;
    let dims = cfg.net_dims(scenario.feature_dim());
    for &seed in &cfg.seeds {
        let dir = cfg.out_dir.join(format!("seed_{seed}"));
        mkdir(&dir)?;
        let mut hooks = RunHooks {
            curve: CurveWriter::create(dir.join("curve.csv"))?,
            dir: dir.clone(),
            echo: cfg.echo(),
            every: cfg.checkpoint_every,
            next_save: cfg.checkpoint_every,
        };
        log::info!("seed {seed}: training {} ({} episodes)", dims.mask.name(), cfg.ppo.total_episodes);
        let outcome = run_train::<f32, _>(&scenario, dims, &cfg.ppo_for_seed(seed), &cfg.curriculum, &mut hooks)?;
        hooks.curve.flush()?;
        hooks.save("final.ckpt", &outcome.params, outcome.episodes, &outcome.rng_digest)?;
        let smoothed = outcome.curve.smoothed_success(cfg.curriculum.window);
        println!(
            "seed={seed} episodes={} level={}/{} smoothed_success={:.4}",
            outcome.episodes,
            outcome.final_level,
            outcome.max_level,
            smoothed.last().copied().unwrap_or(0.0)
        );
    }
    Ok(())
}

/// Config for deployment: the checkpoint's echo (or `--config`), then the
/// command-line overrides.
fn deploy_config(c: &Common, ckpt: &Checkpoint) -> Result<ExperimentConfig> {
    let base = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::from_pairs(ckpt.config.iter().map(|(k, v)| (k.as_str(), v.as_str())))?,
    };
    apply_common(base, c)
}

pub fn deploy(c: &Common, checkpoint: &Path) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint)?;
    let cfg = deploy_config(c, &ckpt)?;
    let scenario = cfg.build_scenario()?;
    let spec = DeploySpec::new(&scenario, &cfg.curriculum, cfg.eval.episodes)?;
    let stats = run_deploy(&mut NetAgent::new(&ckpt.params, cfg.eval.mode), &spec, &cfg.seeds)?;
    export_stats(&stats, &cfg.out_dir)?;
    println!(
        "episodes={} success_rate={:.4} mean_steps={:.2} efficiency={:.4}",
        stats.episodes, stats.success_rate, stats.mean_steps, stats.efficiency
    );
    Ok(())
}

fn print_sweep(sweep: &odonav::evalharness::SweepResult) {
    for p in &sweep.points {
        println!(
            "{}={} ate_m={:.4} success_rate={:.4}",
            sweep.param_name, p.param, p.ate_m, p.stats.success_rate
        );
    }
}

pub fn sweep_appearance(c: &Common, checkpoint: &Path) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint)?;
    let cfg = deploy_config(c, &ckpt)?;
    let scenario = cfg.build_scenario()?;
    let spec = DeploySpec::new(&scenario, &cfg.curriculum, cfg.eval.episodes)?;
    let mut agent = NetAgent::new(&ckpt.params, cfg.eval.mode);
    let sweep = appearance_sweep(&mut agent, &spec, &cfg.eval.shifts(), &cfg.seeds)?;
    export_sweep(&sweep, &cfg.out_dir)?;
    print_sweep(&sweep);
    Ok(())
}

pub fn sweep_noise(c: &Common, checkpoint: &Path) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint)?;
    let cfg = deploy_config(c, &ckpt)?;
    let scenario = cfg.build_scenario()?;
    let spec = DeploySpec::new(&scenario, &cfg.curriculum, cfg.eval.episodes)?;
    let mut agent = NetAgent::new(&ckpt.params, cfg.eval.mode);
    let sweep = noise_sweep(&mut agent, &spec, &cfg.eval.noise_grid(), cfg.eval.noise_seed, &cfg.seeds)?;
    export_sweep(&sweep, &cfg.out_dir)?;
    print_sweep(&sweep);
    Ok(())
}
