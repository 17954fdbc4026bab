use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "odonav", version, about = "Route navigation experiments with recurrent PPO")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Experiment config file (`key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed list, e.g. `0,1,2` or `0..6`; replaces `run.seeds`.
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Output directory; replaces `run.out_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Config override `key=value`; repeatable, applied in order.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic route, its embeddings and its odometry.
    Gen,
    /// Convert a KITTI pose file into the route pose format.
    Ingest { kitti: PathBuf },
    /// Train one policy per seed.
    Train,
    /// Deploy a checkpoint and report success statistics.
    Deploy { checkpoint: PathBuf },
    /// Deploy under increasing appearance shift.
    SweepAppearance { checkpoint: PathBuf },
    /// Deploy under increasing odometry noise.
    SweepNoise { checkpoint: PathBuf },
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ODONAV_LOG", "info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            eprintln!("error kind=UsageError msg={}", one_line(msg.lines().next().unwrap_or("")));
            return ExitCode::from(2);
        }
    };
    let c = &cli.common;
    let result = match &cli.command {
        Command::Gen => commands::gen(c),
        Command::Ingest { kitti } => commands::ingest(c, kitti),
        Command::Train => commands::train(c),
        Command::Deploy { checkpoint } => commands::deploy(c, checkpoint),
        Command::SweepAppearance { checkpoint } => commands::sweep_appearance(c, checkpoint),
        Command::SweepNoise { checkpoint } => commands::sweep_noise(c, checkpoint),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error kind={} msg={}", e.kind(), one_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}
