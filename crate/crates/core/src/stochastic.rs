// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

//! Time grids, reproducible Wiener increments and the parallel ensemble runner.
//!
//! Every trajectory `k` draws from its own ChaCha20 stream keyed by
//! `stable_hash(master_seed, k)`, so a path depends only on the seed, the
//! trajectory index, the grid and the channel weights. Trajectory results are
//! collected in index order and reduced by a fixed pairwise tree, which makes
//! ensemble statistics bit-identical for any number of workers.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WORKERS_ENV: &str = "QFILTER_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub t1: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, n_steps: usize) -> Result<Self> {
        let grid = Self { t0, t1, n_steps };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid on `[0, t1]` with step `dt`, which must divide `t1` to 1e-9.
    pub fn with_step(t1: f64, dt: f64) -> Result<Self> {
        let n = (t1 / dt).round();
        if !(n >= 1.0) || ((n * dt - t1).abs() > 1e-9 * t1.abs().max(1.0)) {
            return Err(Error::InvalidArgument(format!("step {dt} does not divide [0, {t1}]")));
        }
        Self::new(0.0, t1, n as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0.is_finite() && self.t1.is_finite() && self.t1 > self.t0) {
            return Err(Error::InvalidArgument(format!("grid needs t1 > t0, got [{}, {}]", self.t0, self.t1)));
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidArgument("grid needs at least one step".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t1
        } else {
            self.t0 + k as f64 * self.dt()
        }
    }

    /// Index of the grid point at `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.dt();
        let k = x.round();
        ((x - k).abs() < 1e-6 && k >= 0.0 && k <= self.n_steps as f64).then_some(k as usize)
    }
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn splitmix64_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `mix(master ⊕ mix(k + γ))` with the SplitMix64 finalizer `mix` and
/// `γ = 0x9E3779B97F4A7C15`.
pub fn stable_hash(master_seed: u64, k: u64) -> u64 {
    splitmix64_mix(master_seed ^ splitmix64_mix(k.wrapping_add(GOLDEN_GAMMA)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPolicy {
    pub master_seed: u64,
}

impl SeedPolicy {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn stream_seed(&self, k: u64) -> u64 {
        stable_hash(self.master_seed, k)
    }
}

/// Standard normal variates from a ChaCha20 stream by the Box–Muller transform.
///
/// The 256-bit key is four consecutive SplitMix64 outputs of the stream seed,
/// laid out little-endian; uniforms are `(⌊u64 / 2¹¹⌋ + ½)·2⁻⁵³`.
pub struct GaussianStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(stream_seed: u64) -> Self {
        let mut key = [0u8; 32];
        let mut state = stream_seed;
        for chunk in key.chunks_exact_mut(8) {
            state = state.wrapping_add(GOLDEN_GAMMA);
            chunk.copy_from_slice(&splitmix64_mix(state).to_le_bytes());
        }
        Self { rng: ChaCha20Rng::from_seed(key), spare: None }
    }

    fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_standard(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let r = (-2.0 * self.uniform().ln()).sqrt();
        let phi = std::f64::consts::TAU * self.uniform();
        self.spare = Some(r * phi.sin());
        r * phi.cos()
    }
}

/// Step-by-step generator of the increments that [`sample_wiener_path`]
/// returns in one block.
pub struct WienerStream {
    gauss: GaussianStream,
    scales: Vec<f64>,
}

impl WienerStream {
    pub fn new(weights: &[f64], dt: f64, seed: &SeedPolicy, k: u64) -> Result<Self> {
        for (index, &w) in weights.iter().enumerate() {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidWeight { index, weight: w });
            }
        }
        Ok(Self {
            gauss: GaussianStream::new(seed.stream_seed(k)),
            scales: weights.iter().map(|w| (w * dt).sqrt()).collect(),
        })
    }

    pub fn width(&self) -> usize {
        self.scales.len()
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for (o, &s) in out.iter_mut().zip(&self.scales) {
            let z = self.gauss.next_standard();
            *o = if s == 0.0 { 0.0 } else { s * z };
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    n_steps: usize,
    width: usize,
    data: Vec<f64>,
}

impl NoisePath {
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn step(&self, k: usize) -> &[f64] {
        &self.data[k * self.width..(k + 1) * self.width]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_steps).map(move |k| self.data[k * self.width + j])
    }
}

pub fn sample_wiener_path(grid: &TimeGrid, weights: &[f64], seed: &SeedPolicy, k: u64) -> Result<NoisePath> {
    grid.validate()?;
    let mut stream = WienerStream::new(weights, grid.dt(), seed, k)?;
    let width = weights.len();
    let mut data = vec![0.0; grid.n_steps * width];
    for row in data.chunks_exact_mut(width.max(1)).take(grid.n_steps) {
        stream.fill(row);
    }
    Ok(NoisePath { n_steps: grid.n_steps, width, data })
}

/// Worker count: an explicit positive request wins, then `QFILTER_WORKERS`,
/// then the machine's available parallelism.
pub fn resolve_workers(requested: usize) -> usize {
    if requested > 0 {
        return requested;
    }
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Runs `job(k)` for `k in 0..n_traj` and returns the results in index order.
/// The first failing trajectory, by index, is reported.
pub fn run_trajectories<T, F>(n_traj: u64, workers: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolve_workers(workers))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let results: Vec<Result<T>> = pool.install(|| (0..n_traj).into_par_iter().map(&job).collect());
    results
        .into_iter()
        .enumerate()
        .map(|(k, r)| r.map_err(|e| e.in_trajectory(k as u64)))
        .collect()
}

/// Sum by a fixed binary tree over the slice order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Absolute difference below which an ensemble mean counts as on target.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub n: usize,
    pub mean: Vec<f64>,
    /// Sample standard deviation over `√n`; zero for a single trajectory.
    pub std_err: Vec<f64>,
}

impl EnsembleStats {
    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        let n = samples.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty ensemble".into()));
        }
        let width = samples[0].len();
        if let Some(bad) = samples.iter().find(|s| s.len() != width) {
            return Err(Error::DimensionMismatch { expected: width, found: bad.len() });
        }
        let mut mean = Vec::with_capacity(width);
        let mut std_err = Vec::with_capacity(width);
        let mut col = vec![0.0; n];
        for j in 0..width {
            for (c, s) in col.iter_mut().zip(samples) {
                *c = s[j];
            }
            let m = pairwise_sum(&col) / n as f64;
            let se = if n > 1 {
                for c in col.iter_mut() {
                    *c = (*c - m) * (*c - m);
                }
                (pairwise_sum(&col) / ((n - 1) * n) as f64).sqrt()
            } else {
                0.0
            };
            mean.push(m);
            std_err.push(se);
        }
        Ok(Self { n, mean, std_err })
    }

    /// `|mean − target| / std_err` per component. A difference within
    /// [`ROUNDOFF_FLOOR`] counts as zero, so entries that vanish up to
    /// rounding do not divide round-off by round-off; otherwise a zero
    /// standard error maps to infinity.
    pub fn deviations(&self, target: &[f64]) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.std_err)
            .zip(target)
            .map(|((m, se), t)| {
                let d = (m - t).abs();
                if d <= ROUNDOFF_FLOOR {
                    0.0
                } else if *se > 0.0 {
                    d / se
                } else {
                    f64::INFINITY
                }
            })
            .collect()
    }
}

pub fn run_ensemble<F>(n_traj: u64, workers: usize, job: F) -> Result<EnsembleStats>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync + Send,
{
    EnsembleStats::from_samples(&run_trajectories(n_traj, workers, job)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_bad_bounds() {
        assert!(TimeGrid::new(1.0, 1.0, 10).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
        let g = TimeGrid::with_step(1.0, 1e-3).unwrap();
        assert_eq!(g.n_steps, 1000);
        assert_eq!(g.time(1000), 1.0);
        assert_eq!(g.index_of(0.25), Some(250));
        assert_eq!(g.index_of(0.2505), None);
    }

    #[test]
    fn zero_weight_column_is_zero() {
        let g = TimeGrid::new(0.0, 1.0, 100).unwrap();
        let p = sample_wiener_path(&g, &[1.0, 0.0], &SeedPolicy::new(3), 0).unwrap();
        assert!(p.column(1).all(|x| x == 0.0));
        assert!(p.column(0).any(|x| x != 0.0));
    }

    #[test]
    fn paths_are_deterministic_and_distinct() {
        let g = TimeGrid::new(0.0, 1.0, 50).unwrap();
        let s = SeedPolicy::new(42);
        let a = sample_wiener_path(&g, &[1.0, 2.0], &s, 7).unwrap();
        let b = sample_wiener_path(&g, &[1.0, 2.0], &s, 7).unwrap();
        let c = sample_wiener_path(&g, &[1.0, 2.0], &s, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn increment_variance() {
        let g = TimeGrid::new(0.0, 1e4, 1_000_000).unwrap();
        let p = sample_wiener_path(&g, &[1.0], &SeedPolicy::new(1), 0).unwrap();
        let n = p.n_steps() as f64;
        let mean = p.column(0).sum::<f64>() / n;
        let var = p.column(0).map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        assert!((var / 0.01 - 1.0).abs() < 0.01, "variance {var}");
    }

    #[test]
    fn constant_job_has_zero_error() {
        let s = run_ensemble(10, 2, |_| Ok(vec![2.5, -1.0])).unwrap();
        assert_eq!(s.mean, vec![2.5, -1.0]);
        assert_eq!(s.std_err, vec![0.0, 0.0]);
        let one = run_ensemble(1, 1, |_| Ok(vec![4.0])).unwrap();
        assert_eq!((one.mean[0], one.std_err[0]), (4.0, 0.0));
    }

    #[test]
    fn failure_reports_lowest_index() {
        let err = run_trajectories(100, 4, |k| if k % 30 == 17 { Err(Error::NonFinite) } else { Ok(k) }).unwrap_err();
        assert_eq!(err, Error::NonFinite.in_trajectory(17));
    }

    #[test]
    fn wiener_endpoint_has_zero_mean() {
        let g = TimeGrid::new(0.0, 1.0, 100).unwrap();
        let seed = SeedPolicy::new(11);
        let s = run_ensemble(4000, 0, |k| {
            let p = sample_wiener_path(&g, &[1.0], &seed, k)?;
            Ok(vec![p.column(0).sum()])
        })
        .unwrap();
        assert!(s.deviations(&[0.0])[0] < 4.0);
        assert!((s.std_err[0] * (4000f64).sqrt() - 1.0).abs() < 0.05);
    }

    #[test]
    fn doleans_exponential_is_a_martingale() {
        let g = TimeGrid::new(0.0, 1.0, 200).unwrap();
        let seed = SeedPolicy::new(5);
        let a = 0.8;
        let s = run_ensemble(20_000, 0, |k| {
            let p = sample_wiener_path(&g, &[1.0], &seed, k)?;
            let w: f64 = p.column(0).sum();
            Ok(vec![(a * w - 0.5 * a * a).exp()])
        })
        .unwrap();
        assert!(s.deviations(&[1.0])[0] < 4.0, "{:?}", s);
    }

    #[test]
    fn statistics_independent_of_worker_count() {
        let g = TimeGrid::new(0.0, 1.0, 20).unwrap();
        let seed = SeedPolicy::new(9);
        let job = |k| {
            let p = sample_wiener_path(&g, &[1.0, 0.5], &seed, k)?;
            Ok(vec![p.column(0).map(f64::exp).sum(), p.column(1).sum()])
        };
        let one = run_ensemble(257, 1, job).unwrap();
        let two = run_ensemble(257, 2, job).unwrap();
        let eight = run_ensemble(257, 8, job).unwrap();
        assert_eq!(one, two);
        assert_eq!(one, eight);
    }
}
