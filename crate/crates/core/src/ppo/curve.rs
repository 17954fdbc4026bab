use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const CURVE_HEADER: &str = "episode,level,success,return,steps";
const FLUSH_EVERY: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub level: usize,
    pub success: bool,
    pub ret: f64,
    pub steps: usize,
}

impl EpisodeRecord {
    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{}", self.episode, self.level, self.success as u8, self.ret, self.steps)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearningCurve {
    pub records: Vec<EpisodeRecord>,
}

impl LearningCurve {
    pub fn push(&mut self, r: EpisodeRecord) {
        debug_assert!(self.records.last().is_none_or(|l| l.episode < r.episode));
        self.records.push(r);
    }

    /// Trailing mean of success over the last `window` episodes, per episode.
    pub fn smoothed_success(&self, window: usize) -> Vec<f64> {
        self.smoothed(window, |r| r.success as u8 as f64)
    }

    pub fn smoothed_return(&self, window: usize) -> Vec<f64> {
        self.smoothed(window, |r| r.ret)
    }

    fn smoothed(&self, window: usize, f: impl Fn(&EpisodeRecord) -> f64) -> Vec<f64> {
        let window = window.max(1);
        let mut out = Vec::with_capacity(self.records.len());
        let mut acc = 0.0;
        for (i, r) in self.records.iter().enumerate() {
            acc += f(r);
            if i >= window {
                acc -= f(&self.records[i - window]);
            }
            out.push(acc / (i + 1).min(window) as f64);
        }
        out
    }

    /// First episode index at which `level` was reached.
    pub fn first_episode_at_level(&self, level: usize) -> Option<usize> {
        self.records.iter().find(|r| r.level >= level).map(|r| r.episode)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CURVE_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }
}

/// Streams episode records to a CSV file, flushing every 100 rows.
pub struct CurveWriter {
    out: BufWriter<File>,
    path: std::path::PathBuf,
    pending: usize,
}

impl CurveWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{CURVE_HEADER}").map_err(|e| Error::io(&path, e))?;
        out.flush().map_err(|e| Error::io(&path, e))?;
        Ok(Self { out, path, pending: 0 })
    }

    pub fn write(&mut self, r: &EpisodeRecord) -> Result<()> {
        writeln!(self.out, "{}", r.csv_row()).map_err(|e| Error::io(&self.path, e))?;
        self.pending += 1;
        if self.pending >= FLUSH_EVERY {
            self.flush()?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.pending = 0;
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

impl Drop for CurveWriter {
    fn drop(&mut self) {
        let _ = self.out.flush();
    }
}
