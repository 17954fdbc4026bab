//! Goal-distance curriculum: level `k` samples goals within `d_k` steps,
//! `d_k = min(diameter, base · 2^(k−1))`, optionally capped. Promotion needs
//! a full window of episodes at or above the success threshold; there is no
//! demotion.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::routeworld::CurriculumLevel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurriculumConfig {
    pub base_distance: usize,
    /// Upper bound on goal distance regardless of route size.
    pub max_distance: Option<usize>,
    pub window: usize,
    pub threshold: f64,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self { base_distance: 5, max_distance: None, window: 100, threshold: 0.8 }
    }
}

impl CurriculumConfig {
    /// Strictly increasing per-level distance caps for a route whose largest
    /// geodesic distance is `diameter`.
    pub fn schedule(&self, diameter: usize) -> Result<Vec<usize>> {
        if self.base_distance == 0 || self.window == 0 || !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidParameter(format!("invalid curriculum {self:?}")));
        }
        let top = self.max_distance.map_or(diameter, |m| m.min(diameter));
        if top == 0 {
            return Err(Error::InvalidParameter("curriculum top distance is 0".into()));
        }
        let mut out = Vec::new();
        let mut d = self.base_distance;
        loop {
            let capped = d.min(top);
            if out.last() != Some(&capped) {
                out.push(capped);
            }
            if capped == top {
                break;
            }
            d = d.saturating_mul(2);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumState {
    /// 1-based level index.
    pub level: usize,
    pub distances: Vec<usize>,
    pub window: VecDeque<bool>,
    pub window_size: usize,
    pub threshold: f64,
}

impl CurriculumState {
    pub fn new(config: &CurriculumConfig, diameter: usize) -> Result<Self> {
        Ok(Self {
            level: 1,
            distances: config.schedule(diameter)?,
            window: VecDeque::with_capacity(config.window),
            window_size: config.window,
            threshold: config.threshold,
        })
    }

    pub fn max_level(&self) -> usize {
        self.distances.len()
    }

    pub fn current(&self) -> CurriculumLevel {
        CurriculumLevel { min_distance: 1, max_distance: self.distances[self.level - 1] }
    }

    /// Range used at the final level.
    pub fn hardest(&self) -> CurriculumLevel {
        CurriculumLevel { min_distance: 1, max_distance: *self.distances.last().expect("non-empty schedule") }
    }

    pub fn success_rate(&self) -> f64 {
        if self.window.is_empty() {
            0.0
        } else {
            self.window.iter().filter(|&&s| s).count() as f64 / self.window.len() as f64
        }
    }

    /// Records one finished episode; returns true on promotion.
    pub fn advance(&mut self, success: bool) -> bool {
        if self.window.len() == self.window_size {
            self.window.pop_front();
        }
        self.window.push_back(success);
        if self.window.len() == self.window_size && self.success_rate() >= self.threshold && self.level < self.max_level() {
            self.level += 1;
            self.window.clear();
            return true;
        }
        false
    }
}
