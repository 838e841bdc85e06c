// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

use super::drift::DriftData;
use super::model::{uncertainty_min_eigenvalue, RMatrix};
use crate::error::{Error, Result};
use crate::stochastic::TimeGrid;

/// Admissibility slack allowed before a Riccati step is rejected.
pub const ADMISSIBILITY_TOL: f64 = 1e-6;

/// `dP/dt = AP + PAᵀ + D − Σ_real λ g gᵀ − 2 Σ_complex λ Re(K ζ̄ ζᵀ K)` with
/// `g = 2P Re ζ + S Im ζ` and `K = P + (i/2)S`.
pub fn riccati_rhs(p: &RMatrix, dd: &DriftData) -> RMatrix {
    let ap = &dd.drift * p;
    let mut out = &ap + ap.transpose() + &dd.diffusion;
    for sig in &dd.real {
        let g = dd.real_gain(p, sig);
        out -= &g * g.transpose() * sig.weight;
    }
    for sig in &dd.complex {
        let v = dd.complex_gain(p, sig);
        out -= (&v * v.adjoint()).map(|z| z.re) * (2.0 * sig.weight);
    }
    out
}

/// The same flow written as `dP/dt = −(αᵀP + Pα) + ε̃ + P μ̄ P` with
/// `α = μ̄P − κ̃ᵀ`.
pub fn riccati_rhs_short(p: &RMatrix, dd: &DriftData) -> RMatrix {
    let alpha = &dd.mu_bar * p - dd.kappa_tilde.transpose();
    let ap = alpha.transpose() * p;
    -(&ap + ap.transpose()) + &dd.epsilon_tilde + p * &dd.mu_bar * p
}

fn symmetrize(m: &mut RMatrix) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// One RK4 step of [`riccati_rhs`], symmetrized, with the uncertainty relation
/// checked afterwards.
pub fn riccati_step(p: &RMatrix, dd: &DriftData, dt: f64) -> Result<RMatrix> {
    let k1 = riccati_rhs(p, dd);
    let k2 = riccati_rhs(&(p + &k1 * (0.5 * dt)), dd);
    let k3 = riccati_rhs(&(p + &k2 * (0.5 * dt)), dd);
    let k4 = riccati_rhs(&(p + &k3 * dt), dd);
    let mut next = p + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0);
    symmetrize(&mut next);
    if next.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let min_eig = uncertainty_min_eigenvalue(&next, &dd.s);
    if min_eig < -ADMISSIBILITY_TOL {
        return Err(Error::Inadmissible { min_eig });
    }
    Ok(next)
}

/// The covariance on every grid point. It does not depend on the record, so
/// one solution serves every trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub grid: TimeGrid,
    pub p: Vec<RMatrix>,
}

impl RiccatiSolution {
    pub fn solve(dd: &DriftData, p0: &RMatrix, grid: TimeGrid) -> Result<Self> {
        grid.validate()?;
        let dt = grid.dt();
        let mut p = Vec::with_capacity(grid.n_steps + 1);
        p.push(p0.clone());
        for k in 0..grid.n_steps {
            let next = riccati_step(&p[k], dd, dt)?;
            p.push(next);
        }
        Ok(Self { grid, p })
    }

    pub fn at(&self, k: usize) -> &RMatrix {
        &self.p[k]
    }

    pub fn last(&self) -> &RMatrix {
        self.p.last().expect("solution has the initial point")
    }
}
