// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::FRAC_1_SQRT_2;

use super::drift::{kind_width, DriftData};
use super::model::{uncertainty_min_eigenvalue, ChannelKind, PhaseSpaceModel, RMatrix, RVector};
use super::riccati::{riccati_step, RiccatiSolution};
use crate::belavkin::{OutputRecord, RecordMode};
use crate::error::{Error, Result};
use crate::operator::C64;
use crate::stochastic::{SeedPolicy, TimeGrid, WienerStream};

/// Gaussian posterior: mean, covariance and log-likelihood of the record.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPosterior {
    pub theta: RVector,
    pub p: RMatrix,
    pub log_rho: f64,
    pub t: f64,
}

impl GaussianPosterior {
    pub fn prior(model: &PhaseSpaceModel, t0: f64) -> Self {
        Self { theta: model.theta0().clone(), p: model.p0().clone(), log_rho: 0.0, t: t0 }
    }

    /// Minimum eigenvalue of `P + (i/2)S`.
    pub fn uncertainty_margin(&self, s: &RMatrix) -> f64 {
        uncertainty_min_eigenvalue(&self.p, s)
    }
}

fn check_width(dd: &DriftData, record: &[f64]) -> Result<()> {
    if record.len() != dd.record_width() {
        return Err(Error::IncrementCount { expected: dd.record_width(), found: record.len() });
    }
    Ok(())
}

/// Euler step of the mean against the innovations, with the gain taken from
/// the current covariance, and the matching log-likelihood increment. The
/// covariance is left unchanged.
pub fn kalman_mean_step(post: &GaussianPosterior, dd: &DriftData, record: &[f64], dt: f64) -> Result<GaussianPosterior> {
    check_width(dd, record)?;
    let theta = &post.theta;
    let mut dtheta = (&dd.drift * theta + &dd.source) * dt;
    let mut dlog = 0.0;
    let (mut ri, mut ci, mut pos) = (0, 0, 0);
    for kind in &dd.layout {
        match kind {
            ChannelKind::Real => {
                let sig = &dd.real[ri];
                let pred = sig.c.dot(theta);
                let innovation = record[pos] - sig.weight * pred * dt;
                dtheta += dd.real_gain(&post.p, sig) * innovation;
                dlog += pred * record[pos] - 0.5 * sig.weight * pred * pred * dt;
                ri += 1;
            }
            ChannelKind::Complex => {
                let sig = &dd.complex[ci];
                let pred: C64 = sig.zeta.iter().zip(theta.iter()).map(|(z, t)| z * t).sum();
                let dz = C64::new(record[pos], record[pos + 1]);
                let innovation = dz - pred * sig.weight * dt;
                let v = dd.complex_gain(&post.p, sig);
                dtheta += (v * innovation).map(|z| 2.0 * z.re);
                dlog += 2.0 * (pred.conj() * dz).re - sig.weight * pred.norm_sqr() * dt;
                ci += 1;
            }
        }
        pos += kind_width(*kind);
    }
    let next = GaussianPosterior { theta: theta + dtheta, p: post.p.clone(), log_rho: post.log_rho + dlog, t: post.t + dt };
    if next.theta.iter().any(|x| !x.is_finite()) || !next.log_rho.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(next)
}

/// The mean step in the form driven by the raw record:
/// `dϑ = −αᵀϑ dt + Sυ dt + Σ g dY`, complex signals entering as the pair
/// `dY± = √2 (Re dZ, Im dZ)`.
pub fn kalman_mean_step_short(post: &GaussianPosterior, dd: &DriftData, record: &[f64], dt: f64) -> Result<GaussianPosterior> {
    check_width(dd, record)?;
    let theta = &post.theta;
    let alpha = &dd.mu_bar * &post.p - dd.kappa_tilde.transpose();
    let mut dtheta = (-(alpha.transpose() * theta) + &dd.source) * dt;
    let mut dlog = 0.0;
    let mut raw = Vec::with_capacity(dd.expanded.len());
    let mut pos = 0;
    for kind in &dd.layout {
        match kind {
            ChannelKind::Real => raw.push(record[pos]),
            ChannelKind::Complex => raw.extend([record[pos] * 2f64.sqrt(), record[pos + 1] * 2f64.sqrt()]),
        }
        pos += kind_width(*kind);
    }
    for (sig, dy) in dd.expanded.iter().zip(&raw) {
        dtheta += dd.real_gain(&post.p, sig) * *dy;
        let pred = sig.c.dot(theta);
        dlog += pred * dy - 0.5 * sig.weight * pred * pred * dt;
    }
    Ok(GaussianPosterior { theta: theta + dtheta, p: post.p.clone(), log_rho: post.log_rho + dlog, t: post.t + dt })
}

/// Mean and covariance advanced together: the mean with the covariance at the
/// start of the step, then one RK4 Riccati step.
pub fn kalman_step(post: &GaussianPosterior, dd: &DriftData, record: &[f64], dt: f64) -> Result<GaussianPosterior> {
    let mut next = kalman_mean_step(post, dd, record, dt)?;
    next.p = riccati_step(&post.p, dd, dt)?;
    Ok(next)
}

/// [`kalman_step`] for models whose observed signals are all complex.
pub fn complex_kalman_step(post: &GaussianPosterior, dd: &DriftData, dz: &[C64], dt: f64) -> Result<GaussianPosterior> {
    if dd.layout.iter().any(|k| *k != ChannelKind::Complex) {
        return Err(Error::KindMismatch("complex increments given for a model with real signals".into()));
    }
    let record: Vec<f64> = dz.iter().flat_map(|z| [z.re, z.im]).collect();
    kalman_step(post, dd, &record, dt)
}

/// Physical-law increments given the posterior mean: `dY = λ cᵀϑ dt + dw` and
/// `dZ = λ ζᵀϑ dt + (dw₊ + i dw₋)/√2`.
pub fn simulate_output_into(post: &GaussianPosterior, dd: &DriftData, noise: &[f64], dt: f64, out: &mut [f64]) {
    let (mut ri, mut ci, mut pos) = (0, 0, 0);
    for kind in &dd.layout {
        match kind {
            ChannelKind::Real => {
                let sig = &dd.real[ri];
                out[pos] = sig.weight * sig.c.dot(&post.theta) * dt + noise[pos];
                ri += 1;
            }
            ChannelKind::Complex => {
                let sig = &dd.complex[ci];
                let pred: C64 = sig.zeta.iter().zip(post.theta.iter()).map(|(z, t)| z * t).sum::<C64>() * sig.weight * dt;
                out[pos] = pred.re + noise[pos] * FRAC_1_SQRT_2;
                out[pos + 1] = pred.im + noise[pos + 1] * FRAC_1_SQRT_2;
                ci += 1;
            }
        }
        pos += kind_width(*kind);
    }
}

pub fn reference_output_into(dd: &DriftData, noise: &[f64], out: &mut [f64]) {
    let mut pos = 0;
    for kind in &dd.layout {
        match kind {
            ChannelKind::Real => out[pos] = noise[pos],
            ChannelKind::Complex => {
                out[pos] = noise[pos] * FRAC_1_SQRT_2;
                out[pos + 1] = noise[pos + 1] * FRAC_1_SQRT_2;
            }
        }
        pos += kind_width(*kind);
    }
}

/// Kalman-filter trajectories sharing one precomputed covariance flow.
#[derive(Debug, Clone)]
pub struct KalmanSetup<'a> {
    pub drift: &'a DriftData,
    pub riccati: &'a RiccatiSolution,
    pub theta0: RVector,
    pub seed: SeedPolicy,
    pub mode: RecordMode,
    pub replay: Option<&'a OutputRecord>,
}

impl<'a> KalmanSetup<'a> {
    pub fn new(drift: &'a DriftData, riccati: &'a RiccatiSolution, theta0: RVector, seed: SeedPolicy, mode: RecordMode) -> Self {
        Self { drift, riccati, theta0, seed, mode, replay: None }
    }

    pub fn with_replay(mut self, record: &'a OutputRecord) -> Self {
        self.replay = Some(record);
        self.mode = RecordMode::ReplayGiven;
        self
    }

    pub fn grid(&self) -> TimeGrid {
        self.riccati.grid
    }

    pub fn run<F>(&self, k: u64, mut observer: F) -> Result<GaussianPosterior>
    where
        F: FnMut(&GaussianPosterior, Option<&[f64]>) -> Result<()>,
    {
        let grid = self.riccati.grid;
        let dt = grid.dt();
        let width = self.drift.record_width();
        let mut stream = match self.mode {
            RecordMode::ReplayGiven => {
                let rec = self.replay.ok_or_else(|| Error::InvalidArgument("replay mode needs a record".into()))?;
                if rec.width != width || rec.n_steps() < grid.n_steps {
                    return Err(Error::InvalidArgument(format!("replay record must have {} steps of width {width}", grid.n_steps)));
                }
                None
            }
            _ => Some(WienerStream::new(&self.drift.noise_weights(), dt, &self.seed, k)?),
        };
        let mut post = GaussianPosterior { theta: self.theta0.clone(), p: self.riccati.at(0).clone(), log_rho: 0.0, t: grid.t0 };
        let mut noise = vec![0.0; width];
        let mut record = vec![0.0; width];
        observer(&post, None)?;
        for step in 0..grid.n_steps {
            match (self.mode, stream.as_mut()) {
                (RecordMode::ReplayGiven, _) => record.copy_from_slice(self.replay.expect("checked above").step(step)),
                (RecordMode::ReferenceMeasure, Some(s)) => {
                    s.fill(&mut noise);
                    reference_output_into(self.drift, &noise, &mut record);
                }
                (_, Some(s)) => {
                    s.fill(&mut noise);
                    simulate_output_into(&post, self.drift, &noise, dt, &mut record);
                }
                (_, None) => unreachable!("noise stream exists outside replay"),
            }
            post = kalman_mean_step(&post, self.drift, &record, dt)?;
            post.p = self.riccati.at(step + 1).clone();
            post.t = grid.time(step + 1);
            observer(&post, Some(&record))?;
        }
        Ok(post)
    }
}
