// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

use super::drift::DriftData;
use super::model::{PhaseSpaceModel, RMatrix, RVector};
use crate::error::{Error, Result};

/// `φ_r(t) = exp((t − r) A)`, the transport of the mean from `r` to `t`.
pub fn transport_propagator(model: &PhaseSpaceModel, r: f64, t: f64) -> Result<RMatrix> {
    if !(r <= t) {
        return Err(Error::InvalidArgument(format!("transport needs r <= t, got r = {r}, t = {t}")));
    }
    let dd = DriftData::new(model);
    Ok((&dd.drift * (t - r)).exp())
}

/// Unconditional mean and covariance at time `t` after the initial state:
/// `e^{At}ϑ₀ + ∫₀ᵗ e^{Ar} Sυ dr` and `e^{At}P₀e^{Aᵀt} + ∫₀ᵗ e^{Ar} D e^{Aᵀr} dr`,
/// both integrals by a single exponential of a block matrix.
pub fn prior_moments(model: &PhaseSpaceModel, t: f64) -> Result<(RVector, RMatrix)> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time {t} must be finite and nonnegative")));
    }
    if t == 0.0 {
        return Ok((model.theta0().clone(), model.p0().clone()));
    }
    let dd = DriftData::new(model);
    let d = dd.dim();
    let a = &dd.drift;

    let mut aug = RMatrix::zeros(d + 1, d + 1);
    aug.view_mut((0, 0), (d, d)).copy_from(&(a * t));
    aug.view_mut((0, d), (d, 1)).copy_from(&(&dd.source * t));
    let e = aug.exp();
    let phi = e.view((0, 0), (d, d)).into_owned();
    let mean = &phi * model.theta0() + e.view((0, d), (d, 1)).column(0);

    let mut vl = RMatrix::zeros(2 * d, 2 * d);
    vl.view_mut((0, 0), (d, d)).copy_from(&(-a * t));
    vl.view_mut((0, d), (d, d)).copy_from(&(&dd.diffusion * t));
    vl.view_mut((d, d), (d, d)).copy_from(&(a.transpose() * t));
    let f = vl.exp();
    let noise = f.view((d, d), (d, d)).transpose() * f.view((0, d), (d, d));
    let mut cov = &phi * model.p0() * phi.transpose() + noise;
    let sym = cov.transpose();
    cov = (cov + sym) * 0.5;
    Ok((mean, cov))
}
