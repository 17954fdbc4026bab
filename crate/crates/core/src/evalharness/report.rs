//! Report files: `stats.json` (flat numeric object), `sweep.csv` and a
//! standalone SVG chart per sweep.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use super::stats::{SeedStats, SuccessStats, SweepResult};
use crate::error::{Error, Result};

pub const SWEEP_HEADER: &str = "param,ate_m,success_rate,mean_steps,efficiency";

fn put(map: &mut Map<String, Value>, key: String, v: impl Into<Value>) {
    map.insert(key, v.into());
}

fn stats_into(map: &mut Map<String, Value>, prefix: &str, s: &SuccessStats) {
    put(map, format!("{prefix}episodes"), s.episodes as u64);
    put(map, format!("{prefix}successes"), s.successes as u64);
    put(map, format!("{prefix}success_rate"), s.success_rate);
    put(map, format!("{prefix}mean_steps"), s.mean_steps);
    put(map, format!("{prefix}median_steps"), s.median_steps);
    put(map, format!("{prefix}efficiency"), s.efficiency);
    put(map, format!("{prefix}seeds"), s.per_seed.len() as u64);
    for (i, p) in s.per_seed.iter().enumerate() {
        put(map, format!("{prefix}seed.{i}.seed"), p.seed);
        put(map, format!("{prefix}seed.{i}.episodes"), p.episodes as u64);
        put(map, format!("{prefix}seed.{i}.successes"), p.successes as u64);
        put(map, format!("{prefix}seed.{i}.success_rate"), p.success_rate);
    }
}

fn get<'a>(map: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    map.get(key).ok_or_else(|| Error::Format(format!("stats.json lacks {key:?}")))
}

fn get_u64(map: &Map<String, Value>, key: &str) -> Result<u64> {
    get(map, key)?.as_u64().ok_or_else(|| Error::Format(format!("{key:?} is not an unsigned integer")))
}

fn get_f64(map: &Map<String, Value>, key: &str) -> Result<f64> {
    get(map, key)?.as_f64().ok_or_else(|| Error::Format(format!("{key:?} is not a number")))
}

fn stats_from(map: &Map<String, Value>, prefix: &str) -> Result<SuccessStats> {
    let n_seeds = get_u64(map, &format!("{prefix}seeds"))? as usize;
    let per_seed = (0..n_seeds)
        .map(|i| {
            Ok(SeedStats {
                seed: get_u64(map, &format!("{prefix}seed.{i}.seed"))?,
                episodes: get_u64(map, &format!("{prefix}seed.{i}.episodes"))? as usize,
                successes: get_u64(map, &format!("{prefix}seed.{i}.successes"))? as usize,
                success_rate: get_f64(map, &format!("{prefix}seed.{i}.success_rate"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SuccessStats {
        episodes: get_u64(map, &format!("{prefix}episodes"))? as usize,
        successes: get_u64(map, &format!("{prefix}successes"))? as usize,
        success_rate: get_f64(map, &format!("{prefix}success_rate"))?,
        mean_steps: get_f64(map, &format!("{prefix}mean_steps"))?,
        median_steps: get_f64(map, &format!("{prefix}median_steps"))?,
        efficiency: get_f64(map, &format!("{prefix}efficiency"))?,
        per_seed,
    })
}

pub fn stats_to_json(stats: &SuccessStats) -> String {
    let mut map = Map::new();
    stats_into(&mut map, "", stats);
    serde_json::to_string_pretty(&Value::Object(map)).expect("numeric map serializes")
}

pub fn stats_from_json(text: &str) -> Result<SuccessStats> {
    match serde_json::from_str::<Value>(text) {
        Ok(Value::Object(map)) => stats_from(&map, ""),
        Ok(_) => Err(Error::Format("stats.json is not an object".into())),
        Err(e) => Err(Error::Format(format!("stats.json: {e}"))),
    }
}

pub fn load_stats(path: impl AsRef<Path>) -> Result<SuccessStats> {
    let path = path.as_ref();
    stats_from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf> {
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes `stats.json` into `dir`.
pub fn export_stats(stats: &SuccessStats, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(dir.join("stats.json"), &stats_to_json(stats))
}

/// Writes `stats.json` (every point, flattened), `sweep.csv` and
/// `sweep.svg` into `dir`.
pub fn export_sweep(sweep: &SweepResult, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut map = Map::new();
    put(&mut map, "points".into(), sweep.points.len() as u64);
    for (j, p) in sweep.points.iter().enumerate() {
        put(&mut map, format!("point.{j}.param"), p.param);
        put(&mut map, format!("point.{j}.ate_m"), p.ate_m);
        stats_into(&mut map, &format!("point.{j}."), &p.stats);
    }
    let json = serde_json::to_string_pretty(&Value::Object(map)).expect("numeric map serializes");

    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for p in &sweep.points {
        let s = &p.stats;
        let _ = writeln!(csv, "{},{},{},{},{}", p.param, p.ate_m, s.success_rate, s.mean_steps, s.efficiency);
    }

    Ok(vec![
        write(dir.join("stats.json"), &json)?,
        write(dir.join("sweep.csv"), &csv)?,
        write(dir.join("sweep.svg"), &render_svg(sweep))?,
    ])
}

/// Reads back the points of a sweep `stats.json`.
pub fn sweep_points_from_json(text: &str) -> Result<Vec<(f64, f64, SuccessStats)>> {
    let map = match serde_json::from_str::<Value>(text) {
        Ok(Value::Object(map)) => map,
        Ok(_) => return Err(Error::Format("stats.json is not an object".into())),
        Err(e) => return Err(Error::Format(format!("stats.json: {e}"))),
    };
    (0..get_u64(&map, "points")? as usize)
        .map(|j| {
            Ok((
                get_f64(&map, &format!("point.{j}.param"))?,
                get_f64(&map, &format!("point.{j}.ate_m"))?,
                stats_from(&map, &format!("point.{j}."))?,
            ))
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Success rate against the sweep parameter as a self-contained SVG.
pub fn render_svg(sweep: &SweepResult) -> String {
    const W: f64 = 480.0;
    const H: f64 = 320.0;
    const M: f64 = 48.0;
    let xs: Vec<f64> = sweep.points.iter().map(|p| p.param).collect();
    let (lo, hi) = match (xs.first(), xs.last()) {
        (Some(&a), Some(&b)) if b > a => (a, b),
        (Some(&a), _) => (a - 0.5, a + 0.5),
        _ => (0.0, 1.0),
    };
    let px = |x: f64| M + (x - lo) / (hi - lo) * (W - 2.0 * M);
    let py = |y: f64| H - M - y.clamp(0.0, 1.0) * (H - 2.0 * M);
    let name = escape(&sweep.param_name);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{M} {top} V{base} H{right}" fill="none" stroke="black"/>"#,
        top = M,
        base = H - M,
        right = W - M
    );
    for y in [0.0, 0.5, 1.0] {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{y:.1}</text>"#, M - 6.0, py(y) + 4.0);
    }
    for x in [lo, hi] {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x:.3}</text>"#, px(x), H - M + 16.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{name}</text>"#, W / 2.0, H - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">success rate</text>"#,
        H / 2.0,
        H / 2.0
    );
    let pts: Vec<String> =
        sweep.points.iter().map(|p| format!("{:.2},{:.2}", px(p.param), py(p.stats.success_rate))).collect();
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, pts.join(" "));
    for p in &sweep.points {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"><title>{name}={} ate={:.3} m success={:.3}</title></circle>"#,
            px(p.param),
            py(p.stats.success_rate),
            p.param,
            p.ate_m,
            p.stats.success_rate
        );
    }
    s.push_str("</svg>\n");
    s
}
