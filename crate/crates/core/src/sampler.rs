//! Uniform index sampling, fresh-set bookkeeping and the stopping rule, plus a
//! Monte-Carlo simulator for the stopping time.

use std::io::Write;

use bitvec::vec::BitVec;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng;

/// Uniform draw from `{0, ..., n-1}`.
pub fn sample_index<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::Config("cannot sample an index from an empty dataset".into()));
    }
    Ok(rng.random_range(0..n))
}

/// The set of dataset indices drawn so far.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreshSet {
    seen: BitVec,
    count: usize,
}

impl FreshSet {
    pub fn new(n: usize) -> Self {
        Self { seen: BitVec::repeat(false, n), count: 0 }
    }

    pub fn n(&self) -> usize {
        self.seen.len()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.seen.get(idx).is_some_and(|b| *b)
    }

    /// Marks `idx` as seen; returns whether it was fresh.
    pub fn record(&mut self, idx: usize) -> Result<bool> {
        let n = self.n();
        let mut bit = self
            .seen
            .get_mut(idx)
            .ok_or_else(|| Error::Logic(format!("index {idx} out of range for n={n}")))?;
        if *bit {
            return Ok(false);
        }
        bit.set(true);
        self.count += 1;
        Ok(true)
    }

    /// The sampling loop runs while `count <= n/2`, so it stops once
    /// `count > floor(n/2)`.
    pub fn should_stop(&self) -> bool {
        self.count > self.n() / 2
    }

    /// Fresh count at which [`should_stop`](Self::should_stop) first fires.
    pub fn stop_count(n: usize) -> usize {
        n / 2 + 1
    }
}

/// Number of uniform draws until the stopping rule fires.
pub fn draw_tau<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<usize> {
    let mut fresh = FreshSet::new(n);
    let mut t = 0;
    while !fresh.should_stop() {
        let idx = sample_index(rng, n)?;
        fresh.record(idx)?;
        t += 1;
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauStats {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub tau_samples: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauSummary {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub mean_tau: f64,
    pub max_tau: usize,
    pub frac_exceed_2n: f64,
}

impl TauStats {
    pub fn mean(&self) -> f64 {
        self.tau_samples.iter().sum::<usize>() as f64 / self.trials as f64
    }

    pub fn max(&self) -> usize {
        self.tau_samples.iter().copied().max().unwrap_or(0)
    }

    /// Empirical `P[tau > threshold]`.
    pub fn frac_exceeding(&self, threshold: usize) -> f64 {
        self.tau_samples.iter().filter(|&&t| t > threshold).count() as f64 / self.trials as f64
    }

    pub fn summary(&self) -> TauSummary {
        TauSummary {
            n: self.n,
            trials: self.trials,
            seed: self.seed,
            mean_tau: self.mean(),
            max_tau: self.max(),
            frac_exceed_2n: self.frac_exceeding(2 * self.n),
        }
    }

    /// CSV with columns `trial,tau`, preceded by a `#` configuration line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# n={} trials={} seed={}", self.n, self.trials, self.seed)?;
        writeln!(out, "trial,tau")?;
        for (i, t) in self.tau_samples.iter().enumerate() {
            writeln!(out, "{i},{t}")?;
        }
        Ok(())
    }
}

/// Runs `trials` independent stopping-time draws. Trial `i` uses its own RNG
/// stream derived from `(seed, n, i)`, so results do not depend on scheduling.
pub fn simulate_tau(n: usize, trials: usize, seed: u64) -> Result<TauStats> {
    if n == 0 || trials == 0 {
        return Err(Error::Config("simulate_tau needs n >= 1 and trials >= 1".into()));
    }
    let tau_samples = (0..trials)
        .into_par_iter()
        .map(|i| draw_tau(n, &mut rng::stream(seed, &[n as u64, i as u64])))
        .collect::<Result<Vec<_>>>()?;
    Ok(TauStats { n, trials, seed, tau_samples })
}
