//! Streaming mean/variance and the deterministic parallel path runner.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Welford accumulator, mergeable with Chan's pairwise update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&self, other: &RunningStats) -> RunningStats {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * (other.n as f64 / n as f64);
        let m2 = self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64 / n as f64);
        RunningStats { n, mean, m2 }
    }

    /// Fixed-shape reduction: sequential within blocks of 64, then a balanced
    /// pairwise tree. The result depends only on the sample order.
    pub fn from_samples(samples: &[f64]) -> RunningStats {
        const BLOCK: usize = 64;
        let mut level: Vec<RunningStats> = samples
            .chunks(BLOCK)
            .map(|c| {
                let mut s = RunningStats::default();
                c.iter().for_each(|&x| s.push(x));
                s
            })
            .collect();
        while level.len() > 1 {
            level = level
                .chunks(2)
                .map(|p| if p.len() == 2 { p[0].merge(&p[1]) } else { p[0] })
                .collect();
        }
        level.pop().unwrap_or_default()
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// Runs `f(path_index)` for every index in `0..n_paths` on `workers` threads
/// and returns the results in index order.
pub fn map_paths<T, F>(n_paths: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let workers = workers.max(1);
    if workers == 1 {
        return (0..n_paths as u64).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| (0..n_paths as u64).into_par_iter().map(&f).collect())
}
