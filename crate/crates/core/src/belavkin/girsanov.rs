// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

//! Moments of the posterior reweighted by `exp(Σ g dY − ½ Σ g² Λ dt)`, and the
//! deterministic equation they solve.

use super::channel::DetectionKind;
use super::filter::FilterModel;
use super::output::{RecordMode, TrajectorySetup};
use crate::error::{Error, Result};
use crate::operator::{schrodinger_action, trace_product, CMatrix, DensityMatrix, Operator, C64};
use crate::stochastic::{run_ensemble, EnsembleStats, TimeGrid};

/// A function of time that is constant on each grid step, one value per
/// observed signal.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    n_steps: usize,
    width: usize,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn constant(n_steps: usize, width: usize, g: f64) -> Self {
        Self { n_steps, width, values: vec![g; n_steps * width] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::DimensionMismatch { expected: width, found: bad.len() });
        }
        Ok(Self { n_steps: rows.len(), width, values: rows.concat() })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.width..(k + 1) * self.width]
    }
}

pub fn girsanov_log_increment(g: &[f64], dy: &[f64], weights: &[f64], dt: f64) -> f64 {
    g.iter().zip(dy).zip(weights).map(|((g, y), w)| g * y - 0.5 * g * g * w * dt).sum()
}

fn check(model: &FilterModel, grid: &TimeGrid, g: &StepFunction) -> Result<()> {
    if !model.all_kind(DetectionKind::Homodyne) {
        return Err(Error::KindMismatch("weighted moments are defined for homodyne signals".into()));
    }
    if g.width() != model.observed().len() || g.n_steps() < grid.n_steps {
        return Err(Error::DimensionMismatch { expected: model.observed().len(), found: g.width() });
    }
    Ok(())
}

/// Monte Carlo estimate of `E[w_t tr(X ς_t)]` and `E[w_t tr ς_t]` under the
/// reference measure, returned as a two-component ensemble.
pub fn girsanov_weighted_moment(setup: &TrajectorySetup, g: &StepFunction, x: &Operator, n_traj: u64, workers: usize) -> Result<EnsembleStats> {
    check(setup.model, &setup.grid, g)?;
    if setup.mode != RecordMode::ReferenceMeasure {
        return Err(Error::InvalidArgument("weighted moments are taken under the reference measure".into()));
    }
    let weights = setup.model.noise_weights();
    let dt = setup.grid.dt();
    run_ensemble(n_traj, workers, |k| {
        let mut log_w = 0.0;
        let state = setup.run(k, |s, rec| {
            if let Some(dy) = rec {
                log_w += girsanov_log_increment(g.row(s.step_index() - 1), dy, &weights, dt);
            }
            Ok(())
        })?;
        let scale = (log_w + state.log_likelihood()).exp();
        Ok(vec![scale * state.expectation(x).re, scale])
    })
}

/// RK4 solution of `dς/dt = 𝓛*ς + Σ g Λ (L̄ ς + ς L̄†)`, returning `tr(X ς_t)`.
pub fn girsanov_moment_ode(model: &FilterModel, rho0: &DensityMatrix, grid: &TimeGrid, g: &StepFunction, x: &Operator) -> Result<C64> {
    check(model, grid, g)?;
    let h = model.hamiltonian().matrix().clone();
    let chs: Vec<(CMatrix, f64)> = model.channels().iter().map(|c| (c.op.matrix().clone(), c.weight)).collect();
    let obs: Vec<(CMatrix, f64)> = model.observed().iter().map(|o| (o.op.matrix().clone(), o.weight)).collect();
    let rhs = |rho: &CMatrix, gk: &[f64]| {
        let mut out = schrodinger_action(&h, &chs, rho);
        for ((l, w), gi) in obs.iter().zip(gk) {
            let lr = l * rho;
            out += (&lr + lr.adjoint()) * C64::from(gi * w);
        }
        out
    };
    let dt = grid.dt();
    let half = C64::from(0.5 * dt);
    let mut rho = rho0.matrix().clone();
    for k in 0..grid.n_steps {
        let gk = g.row(k);
        let k1 = rhs(&rho, gk);
        let k2 = rhs(&(&rho + &k1 * half), gk);
        let k3 = rhs(&(&rho + &k2 * half), gk);
        let k4 = rhs(&(&rho + &k3 * C64::from(dt)), gk);
        rho += (k1 + (k2 + k3) * C64::from(2.0) + k4) * C64::from(dt / 6.0);
    }
    Ok(trace_product(x.matrix(), &rho))
}
