use crate::error::{Error, Result};

/// One finished deployment episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeOutcome {
    pub seed: u64,
    pub index: usize,
    pub start: usize,
    pub goal: usize,
    pub geodesic: usize,
    pub success: bool,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedStats {
    pub seed: u64,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
}

/// Aggregate deployment statistics. Step counts and efficiency are taken
/// over successful episodes only and are 0 when there are none.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessStats {
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_steps: f64,
    pub median_steps: f64,
    /// Mean of `geodesic(start, goal) / steps` over successes.
    pub efficiency: f64,
    /// Sorted by seed.
    pub per_seed: Vec<SeedStats>,
}

impl SuccessStats {
    /// Aggregates an episode log; the result does not depend on log order.
    pub fn from_outcomes(mut log: Vec<EpisodeOutcome>) -> Result<Self> {
        if log.is_empty() {
            return Err(Error::InvalidInput("no episodes to aggregate".into()));
        }
        log.sort_by_key(|o| (o.seed, o.index));
        let wins: Vec<&EpisodeOutcome> = log.iter().filter(|o| o.success).collect();
        let successes = wins.len();
        let mut steps: Vec<usize> = wins.iter().map(|o| o.steps).collect();
        steps.sort_unstable();
        let (mean_steps, median_steps, efficiency) = if steps.is_empty() {
            (0.0, 0.0, 0.0)
        } else {
            let n = steps.len();
            let mean = steps.iter().sum::<usize>() as f64 / n as f64;
            let median =
                if n % 2 == 1 { steps[n / 2] as f64 } else { (steps[n / 2 - 1] + steps[n / 2]) as f64 / 2.0 };
            let eff = wins.iter().map(|o| o.geodesic as f64 / o.steps.max(1) as f64).sum::<f64>() / n as f64;
            (mean, median, eff)
        };
        let mut per_seed: Vec<SeedStats> = Vec::new();
        for o in &log {
            match per_seed.last_mut() {
                Some(s) if s.seed == o.seed => {
                    s.episodes += 1;
                    s.successes += o.success as usize;
                }
                _ => per_seed.push(SeedStats { seed: o.seed, episodes: 1, successes: o.success as usize, success_rate: 0.0 }),
            }
        }
        for s in &mut per_seed {
            s.success_rate = s.successes as f64 / s.episodes as f64;
        }
        Ok(Self {
            episodes: log.len(),
            successes,
            success_rate: successes as f64 / log.len() as f64,
            mean_steps,
            median_steps,
            efficiency,
            per_seed,
        })
    }

    /// Unweighted mean of the per-seed success rates.
    pub fn mean_seed_success(&self) -> f64 {
        self.per_seed.iter().map(|s| s.success_rate).sum::<f64>() / self.per_seed.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub param: f64,
    /// ATE of the dead-reckoned track used at this point, meters.
    pub ate_m: f64,
    pub stats: SuccessStats,
}

/// Deployment statistics along a strictly increasing parameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub param_name: String,
    pub points: Vec<SweepPoint>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ep(seed: u64, index: usize, success: bool, geodesic: usize, steps: usize) -> EpisodeOutcome {
        EpisodeOutcome { seed, index, start: 0, goal: geodesic, geodesic, success, steps }
    }

    #[test]
    fn aggregates_successes_only() {
        let stats = SuccessStats::from_outcomes(vec![
            ep(1, 0, true, 4, 4),
            ep(1, 1, false, 9, 50),
            ep(0, 0, true, 3, 6),
            ep(0, 1, true, 2, 8),
        ])
        .unwrap();
        assert_eq!(stats.episodes, 4);
        assert_eq!(stats.successes, 3);
        assert_eq!(stats.success_rate, 0.75);
        assert_eq!(stats.mean_steps, 6.0);
        assert_eq!(stats.median_steps, 6.0);
        assert!((stats.efficiency - (1.0 + 0.5 + 0.25) / 3.0).abs() < 1e-12);
        assert_eq!(stats.per_seed.len(), 2);
        assert_eq!(stats.per_seed[0].seed, 0);
        assert_eq!(stats.per_seed[0].success_rate, 1.0);
        assert_eq!(stats.per_seed[1].success_rate, 0.5);
    }

    #[test]
    fn order_independent() {
        let log = vec![ep(2, 0, true, 1, 1), ep(0, 3, false, 4, 20), ep(1, 1, true, 5, 7), ep(0, 1, true, 2, 2)];
        let mut rev = log.clone();
        rev.reverse();
        assert_eq!(SuccessStats::from_outcomes(log).unwrap(), SuccessStats::from_outcomes(rev).unwrap());
    }

    #[test]
    fn no_successes_gives_zero_step_statistics() {
        let stats = SuccessStats::from_outcomes(vec![ep(0, 0, false, 3, 50)]).unwrap();
        assert_eq!((stats.success_rate, stats.mean_steps, stats.efficiency), (0.0, 0.0, 0.0));
        assert!(SuccessStats::from_outcomes(Vec::new()).is_err());
    }
}
