//! Monte Carlo photon-escape oracle.
//!
//! Each of the `n` excitations of level `n` escapes to the detector
//! independently with probability `1 - e^{-tau}`, and the click count is the
//! number that escaped. Nothing from [`crate::detection`] is used here apart
//! from the context type; the escape probability is recomputed locally.
//!
//! # Random stream
//!
//! Sampling uses xoshiro256** seeded from a `u64` through SplitMix64. Work is
//! split over a fixed number of workers: worker `w` starts from the seeded
//! generator advanced by `w` calls to the xoshiro256** `jump` function
//! (2^128 steps each), and runs `trials / workers` trials, with the first
//! `trials % workers` workers taking one extra. Counts are merged by
//! summation, so results are bit-reproducible for a fixed
//! `(seed, trials, workers)`.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::detection::DetectionContext;
use crate::error::{Error, Result};
use crate::state::PriorState;

pub const MIN_TRIALS: u64 = 10_000;
/// Minimum number of samples with the conditioning outcome.
pub const MIN_CONDITIONED: u64 = 100;
pub const DEFAULT_WORKERS: usize = 8;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TRIALS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OracleConfig {
    pub trials: u64,
    pub seed: u64,
    pub workers: usize,
}

impl OracleConfig {
    pub fn new(trials: u64, seed: u64) -> Result<Self> {
        if trials < MIN_TRIALS {
            return Err(Error::TooFewTrials {
                got: trials,
                min: MIN_TRIALS,
            });
        }
        Ok(Self {
            trials,
            seed,
            workers: DEFAULT_WORKERS,
        })
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    fn share(&self, worker: usize) -> u64 {
        let w = self.workers as u64;
        self.trials / w + u64::from((worker as u64) < self.trials % w)
    }
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            workers: DEFAULT_WORKERS,
        }
    }
}

/// Seeded uniform source for one worker.
#[derive(Debug, Clone)]
pub struct Sampler {
    rng: Xoshiro256StarStar,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self::for_worker(seed, 0)
    }

    pub fn for_worker(seed: u64, worker: usize) -> Self {
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
        for _ in 0..worker {
            rng.jump();
        }
        Self { rng }
    }

    /// Uniform on `[0, 1)` from the top 53 bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

fn escape_probability(ctx: &DetectionContext) -> f64 {
    -f64::exp_m1(-ctx.tau())
}

fn clicks(n: usize, escape: f64, rng: &mut Sampler) -> usize {
    (0..n).filter(|_| rng.uniform() < escape).count()
}

/// Draws the click count of level `n` over `[0, t]`.
pub fn sample_click_count(n: usize, ctx: &DetectionContext, rng: &mut Sampler) -> usize {
    clicks(n, escape_probability(ctx), rng)
}

/// Runs `body` on every worker and sums the returned count vectors.
fn partitioned<F>(cfg: &OracleConfig, bins: usize, body: F) -> Vec<u64>
where
    F: Fn(&mut Sampler, u64, &mut [u64]) + Sync,
{
    (0..cfg.workers)
        .into_par_iter()
        .map(|w| {
            let mut counts = vec![0u64; bins];
            let mut rng = Sampler::for_worker(cfg.seed, w);
            body(&mut rng, cfg.share(w), &mut counts);
            counts
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(vec![0u64; bins], |mut acc, c| {
            acc.iter_mut().zip(c).for_each(|(a, b)| *a += b);
            acc
        })
}

/// Frequency estimate of a probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleEstimate {
    pub value: f64,
    pub stderr: f64,
    pub trials: u64,
    pub seed: u64,
}

impl OracleEstimate {
    fn from_count(count: u64, trials: u64, seed: u64) -> Self {
        let value = count as f64 / trials as f64;
        Self {
            value,
            stderr: (value * (1.0 - value) / trials as f64).sqrt(),
            trials,
            seed,
        }
    }

    /// `|value - exact| <= sigmas * stderr`.
    pub fn agrees_with(&self, exact: f64, sigmas: f64) -> bool {
        (self.value - exact).abs() <= sigmas * self.stderr
    }
}

/// `|frequency - exact|` in units of `sqrt(exact (1 - exact) / samples)`,
/// the spread expected if `exact` is right. Unlike the estimate's own
/// stderr this stays finite when a rare cell happens to be empty.
pub fn deviation_sigmas(frequency: f64, exact: f64, samples: u64) -> f64 {
    let diff = (frequency - exact).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / (exact * (1.0 - exact) / samples as f64).sqrt()
}

/// Click-count histogram of level `n`, indices `0..=n`.
pub fn click_histogram(n: usize, ctx: &DetectionContext, cfg: &OracleConfig) -> Vec<u64> {
    let escape = escape_probability(ctx);
    partitioned(cfg, n + 1, |rng, trials, counts| {
        for _ in 0..trials {
            counts[clicks(n, escape, rng)] += 1;
        }
    })
}

/// Estimate of `p(y_k | x_n)`.
pub fn estimate_likelihood(n: usize, k: usize, ctx: &DetectionContext, cfg: &OracleConfig) -> Result<OracleEstimate> {
    check_trials(cfg)?;
    let hist = click_histogram(n, ctx, cfg);
    let count = hist.get(k).copied().unwrap_or(0);
    Ok(OracleEstimate::from_count(count, cfg.trials, cfg.seed))
}

fn check_trials(cfg: &OracleConfig) -> Result<()> {
    if cfg.trials < MIN_TRIALS {
        return Err(Error::TooFewTrials {
            got: cfg.trials,
            min: MIN_TRIALS,
        });
    }
    Ok(())
}

/// Joint counts `[n][k]` from ancestral sampling: draw the level from the
/// prior, then its clicks.
pub fn joint_counts(prior: &PriorState, ctx: &DetectionContext, cfg: &OracleConfig) -> Vec<Vec<u64>> {
    let dim = prior.dim();
    let escape = escape_probability(ctx);
    let cdf: Vec<f64> = prior
        .probs()
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let last = (0..dim).rev().find(|&n| prior.is_supported(n)).unwrap_or(0);
    let flat = partitioned(cfg, dim * dim, |rng, trials, counts| {
        for _ in 0..trials {
            let u = rng.uniform();
            let n = cdf.iter().position(|&c| u < c).unwrap_or(last);
            let k = clicks(n, escape, rng);
            counts[n * dim + k] += 1;
        }
    });
    flat.chunks(dim).map(|c| c.to_vec()).collect()
}

/// Estimate of `p(y_k)`.
pub fn estimate_outcome_prob(
    prior: &PriorState,
    k: usize,
    ctx: &DetectionContext,
    cfg: &OracleConfig,
) -> Result<OracleEstimate> {
    check_trials(cfg)?;
    let joint = joint_counts(prior, ctx, cfg);
    let count = joint.iter().map(|row| row.get(k).copied().unwrap_or(0)).sum();
    Ok(OracleEstimate::from_count(count, cfg.trials, cfg.seed))
}

/// Conditional level frequencies given the outcome `k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorEstimate {
    pub probs: Vec<f64>,
    pub stderr: Vec<f64>,
    pub conditioned: u64,
    pub trials: u64,
    pub seed: u64,
}

impl PosteriorEstimate {
    pub fn agrees_with(&self, exact: &[f64], sigmas: f64) -> bool {
        self.probs
            .iter()
            .zip(&self.stderr)
            .zip(exact)
            .all(|((p, s), e)| (p - e).abs() <= sigmas * s)
    }
}

pub fn estimate_posterior(
    prior: &PriorState,
    k: usize,
    ctx: &DetectionContext,
    cfg: &OracleConfig,
) -> Result<PosteriorEstimate> {
    check_trials(cfg)?;
    let joint = joint_counts(prior, ctx, cfg);
    let column: Vec<u64> = joint.iter().map(|row| row.get(k).copied().unwrap_or(0)).collect();
    let conditioned: u64 = column.iter().sum();
    if conditioned < MIN_CONDITIONED {
        return Err(Error::OutcomeTooRare {
            k,
            count: conditioned,
            min: MIN_CONDITIONED,
        });
    }
    let total = conditioned as f64;
    let probs: Vec<f64> = column.iter().map(|&c| c as f64 / total).collect();
    let stderr = probs.iter().map(|p| (p * (1.0 - p) / total).sqrt()).collect();
    Ok(PosteriorEstimate {
        probs,
        stderr,
        conditioned,
        trials: cfg.trials,
        seed: cfg.seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness of fit of `observed` counts against `expected`
/// probabilities. Adjacent cells are pooled until each expects at least 5
/// counts; cells with zero expected mass must be empty.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> ChiSquareTest {
    let total: u64 = observed.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    let mut impossible_hit = false;
    for (&o, &p) in observed.iter().zip(expected) {
        if p == 0.0 && o > 0 {
            impossible_hit = true;
        }
        obs += o as f64;
        exp += p * total as f64;
        if exp >= 5.0 {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 || obs > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => cells.push((obs, exp)),
        }
    }
    if impossible_hit {
        return ChiSquareTest {
            statistic: f64::INFINITY,
            dof: cells.len().saturating_sub(1),
            p_value: 0.0,
        };
    }
    let statistic: f64 = cells
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    let dof = cells.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
        1.0 - dist.cdf(statistic)
    };
    ChiSquareTest {
        statistic,
        dof,
        p_value,
    }
}
