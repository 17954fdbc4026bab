//! Pose text formats: KITTI odometry ground truth (12 floats per line, the
//! top 3×4 of a camera-to-world transform) and the plain route format
//! `index x y heading`.

use std::fmt::Write as _;
use std::path::Path;

use super::odometry::wrap_angle;
use crate::error::{Error, Result};
use crate::routeworld::RoutePose;

/// Projects KITTI poses onto the (x, z) ground plane, heading
/// `atan2(R[0][2], R[2][2])`. Blank lines are skipped; line numbers in
/// errors are 1-based file lines.
pub fn parse_kitti_poses(text: &str) -> Result<Vec<RoutePose>> {
    let mut poses = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("non-numeric token {t:?}"),
                })
            })
            .collect::<Result<_>>()?;
        if vals.len() != 12 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 12 values, found {}", vals.len()),
            });
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse { line: line_no, msg: "non-finite value".into() });
        }
        let (r02, tx, r22, tz) = (vals[2], vals[3], vals[10], vals[11]);
        poses.push(RoutePose::new(poses.len(), tx, tz, wrap_angle(r02.atan2(r22))));
    }
    Ok(poses)
}

pub fn ingest_kitti_poses(path: impl AsRef<Path>) -> Result<Vec<RoutePose>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_kitti_poses(&text)
}

pub fn parse_route_poses(text: &str) -> Result<Vec<RoutePose>> {
    let mut poses = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let tok: Vec<&str> = t.split_whitespace().collect();
        if tok.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected `index x y heading`, found {} fields", tok.len()),
            });
        }
        let bad = |what: &str| Error::Parse { line: line_no, msg: format!("bad {what}") };
        let index = tok[0].parse::<usize>().map_err(|_| bad("index"))?;
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad(what))
        };
        poses.push(RoutePose::new(index, num(tok[1], "x")?, num(tok[2], "y")?, num(tok[3], "heading")?));
    }
    Ok(poses)
}

pub fn read_route_poses(path: impl AsRef<Path>) -> Result<Vec<RoutePose>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_route_poses(&text)
}

/// Writes the route format with shortest round-trip float formatting.
pub fn write_route_poses(poses: &[RoutePose], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("# index x y heading\n");
    for p in poses {
        let _ = writeln!(out, "{} {} {} {}", p.frame_index, p.x, p.y, p.heading);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
