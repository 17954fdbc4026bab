use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Row-major `rows × cols` matrix of per-frame embeddings with unit-norm rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "feature data has {} values, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_norm(&self, r: usize) -> f64 {
        self.row(r).iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
    }

    /// Renormalizes rows whose norm is off by more than `tol`; returns how many
    /// rows changed.
    pub fn renormalize(&mut self, tol: f64) -> Result<usize> {
        let mut fixed = 0;
        for r in 0..self.rows {
            let norm = self.row_norm(r);
            if !norm.is_finite() || norm == 0.0 {
                return Err(Error::Format(format!("feature row {r} has norm {norm}")));
            }
            if (norm - 1.0).abs() > tol {
                let cols = self.cols;
                for v in &mut self.data[r * cols..(r + 1) * cols] {
                    *v = (*v as f64 / norm) as f32;
                }
                fixed += 1;
            }
        }
        Ok(fixed)
    }
}

/// Cosine similarity accumulated in f64.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    ab / (aa.sqrt() * bb.sqrt())
}

fn unit_rows(rows: usize, cols: usize, raw: &[f64]) -> Vec<f32> {
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let row = &raw[r * cols..(r + 1) * cols];
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        out.extend(row.iter().map(|v| (v / norm) as f32));
    }
    out
}

fn gaussian_unit<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Synthetic route embeddings: an AR(1)-smoothed Gaussian walk whose
/// autocorrelation decays as `exp(-lag / smooth_l)`, rows normalized.
pub fn synth_route_features<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    smooth_l: usize,
    rng: &mut R,
) -> Result<FeatureMatrix> {
    if n < 2 || d < 2 || smooth_l < 1 {
        return Err(Error::InvalidParameter(format!(
            "synth_route_features needs n >= 2, d >= 2, smooth_l >= 1 (got {n}, {d}, {smooth_l})"
        )));
    }
    let a = (-1.0 / smooth_l as f64).exp();
    let innov = (1.0 - a * a).sqrt();
    let mut raw = vec![0.0f64; n * d];
    for j in 0..d {
        raw[j] = rng.sample(StandardNormal);
    }
    for i in 1..n {
        for j in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            raw[i * d + j] = a * raw[(i - 1) * d + j] + innov * z;
        }
    }
    FeatureMatrix::new(n, d, unit_rows(n, d, &raw))
}

/// Parametric appearance change in embedding space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppearanceShift {
    /// 0 leaves features untouched, 1 replaces them with corruption.
    pub severity: f64,
    /// Share of the corruption common to every frame.
    pub global_fraction: f64,
    pub seed: u64,
}

impl AppearanceShift {
    pub fn new(severity: f64, seed: u64) -> Self {
        Self { severity, global_fraction: 0.5, seed }
    }
}

/// `x' = normalize((1 - s) x + s (√ρ u + √(1 - ρ) n_i))` with one global unit
/// direction `u` and independent unit noise `n_i` per frame.
pub fn apply_appearance_shift(features: &FeatureMatrix, shift: &AppearanceShift) -> Result<FeatureMatrix> {
    let s = shift.severity;
    let rho = shift.global_fraction;
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidParameter(format!("appearance severity {s} outside [0, 1]")));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("global fraction {rho} outside [0, 1]")));
    }
    if s == 0.0 {
        return Ok(features.clone());
    }
    let d = features.cols;
    let mut rng = ChaCha8Rng::seed_from_u64(shift.seed);
    let u = gaussian_unit(d, &mut rng);
    let (wg, wn) = (rho.sqrt(), (1.0 - rho).sqrt());
    let mut raw = Vec::with_capacity(features.data.len());
    for r in 0..features.rows {
        let noise = gaussian_unit(d, &mut rng);
        for (j, &x) in features.row(r).iter().enumerate() {
            raw.push((1.0 - s) * x as f64 + s * (wg * u[j] + wn * noise[j]));
        }
    }
    // (1 - s) x_i can cancel the corruption exactly only on a measure-zero set;
    // guard anyway so rows stay finite.
    for r in 0..features.rows {
        let row = &mut raw[r * d..(r + 1) * d];
        if row.iter().map(|v| v * v).sum::<f64>() < 1e-24 {
            row.copy_from_slice(&u);
        }
    }
    FeatureMatrix::new(features.rows, d, unit_rows(features.rows, d, &raw))
}
