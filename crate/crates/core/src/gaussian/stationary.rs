// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

use nalgebra::SymmetricEigen;

use super::model::{ChannelKind, PhaseSpaceModel, RMatrix};
use crate::error::{Error, Result};
use crate::operator::{CMatrix, C64};

fn require_complete_complex(model: &PhaseSpaceModel) -> Result<()> {
    if model.channels().is_empty() {
        return Err(Error::IncompleteObservation("the model has no channels".into()));
    }
    if let Some(j) = model.channels().iter().position(|c| !c.observed || c.kind != ChannelKind::Complex) {
        return Err(Error::IncompleteObservation(format!("channel {j} is not an observed complex signal")));
    }
    Ok(())
}

/// `ε = 2 Re E`.
fn epsilon_matrix(model: &PhaseSpaceModel) -> RMatrix {
    model.coupling_form().map(|z| 2.0 * z.re)
}

/// `c = iS`.
fn c_matrix(model: &PhaseSpaceModel) -> CMatrix {
    model.s().map(|x| C64::new(0.0, x))
}

/// Fixed point `P∞ = ½ ε^{−1/2} |ε^{1/2} c ε^{1/2}| ε^{−1/2}` of the covariance
/// flow under complete complex observation, for models with `ωcε = εcω`.
pub fn stationary_covariance(model: &PhaseSpaceModel) -> Result<RMatrix> {
    require_complete_complex(model)?;
    let eps = epsilon_matrix(model);
    let c = c_matrix(model);
    let omega = model.omega().map(C64::from);
    let eps_c = eps.map(C64::from);

    let lhs = &omega * &c * &eps_c;
    let rhs = &eps_c * &c * &omega;
    let scale = (omega.norm() * c.norm() * eps_c.norm()).max(1.0);
    let residual = (lhs - rhs).norm();
    if residual > 1e-10 * scale {
        return Err(Error::Commutativity { residual });
    }

    let eig = SymmetricEigen::new(eps.clone());
    let top = eig.eigenvalues.max();
    if !(eig.eigenvalues.min() > 1e-12 * top) {
        return Err(Error::InvalidArgument(format!("ε is singular: eigenvalues {:?}", eig.eigenvalues.as_slice())));
    }
    let v = &eig.eigenvectors;
    let half = v * RMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * v.transpose();
    let inv_half = v * RMatrix::from_diagonal(&eig.eigenvalues.map(|x| 1.0 / x.sqrt())) * v.transpose();

    let half_c = half.map(C64::from);
    let inner = &half_c * c * &half_c;
    let ie = SymmetricEigen::new(inner);
    let abs_inner = &ie.eigenvectors * CMatrix::from_diagonal(&ie.eigenvalues.map(|x| C64::from(x.abs()))) * ie.eigenvectors.adjoint();

    let inv_half_c = inv_half.map(C64::from);
    let p = &inv_half_c * abs_inner * &inv_half_c * C64::from(0.5);
    let imag = p.map(|z| z.im).norm();
    let real = p.map(|z| z.re);
    if imag > 1e-10 * real.norm().max(1.0) {
        return Err(Error::InvalidArgument(format!("stationary covariance has imaginary part {imag:e}")));
    }
    let sym = real.transpose();
    Ok((real + sym) * 0.5)
}

/// A model whose `ε`, `Ω` and `SᵀS` are multiples of the identity, reduced to
/// the scalars `ε`, `ω` and the signed commutation scalar `c`.
///
/// `c > 0` when the couplings lower the excitation (`[L, L†] > 0`), the
/// stable case; `c < 0` is the unstable one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarReduction {
    pub epsilon: f64,
    pub omega: f64,
    pub c: f64,
}

impl ScalarReduction {
    pub fn stationary(&self) -> f64 {
        0.5 * self.c.abs()
    }

    /// Exponential collapse rate `ε|c|`.
    pub fn rate(&self) -> f64 {
        self.epsilon * self.c.abs()
    }

    /// Scalar gain `l` with complex gain vector `l ζ̄`, at covariance `p I`.
    pub fn gain(&self, p: f64) -> f64 {
        p - 0.5 * self.c
    }

    /// Solution of `dp/dt = ε(c²/4 − p²)` from `p0`.
    pub fn covariance_at(&self, p0: f64, t: f64) -> f64 {
        let half = 0.5 * self.c.abs();
        if half == 0.0 {
            return p0 / (1.0 + self.epsilon * p0 * t);
        }
        let q = (p0 - half) / (p0 + half) * (-self.rate() * t).exp();
        half * (1.0 + q) / (1.0 - q)
    }
}

fn multiple_of_identity(m: &RMatrix) -> Option<f64> {
    let d = m.nrows();
    let a = m.trace() / d as f64;
    ((m - RMatrix::identity(d, d) * a).norm() <= 1e-12 * a.abs().max(1.0)).then_some(a)
}

pub fn scalar_reduction(model: &PhaseSpaceModel) -> Result<ScalarReduction> {
    require_complete_complex(model)?;
    let epsilon = multiple_of_identity(&epsilon_matrix(model)).ok_or_else(|| Error::NotScalar("ε is not a multiple of the identity".into()))?;
    let omega = multiple_of_identity(model.omega()).ok_or_else(|| Error::NotScalar("Ω is not a multiple of the identity".into()))?;
    let s = model.s();
    let c2 = multiple_of_identity(&(s.transpose() * s)).ok_or_else(|| Error::NotScalar("SᵀS is not a multiple of the identity".into()))?;
    let c_abs = c2.max(0.0).sqrt();

    // [L, L†] = −i ζᵀSζ̄ = c|ζ|², so c|ζ|² = Im(ζᵀSζ̄).
    let s_c = s.map(C64::from);
    let (mut num, mut den) = (0.0, 0.0);
    for ch in model.channels() {
        num += ch.weight * (ch.zeta.transpose() * &s_c * ch.zeta.conjugate())[(0, 0)].im;
        den += ch.weight * ch.zeta.norm_squared();
    }
    let signed = if den > 0.0 { num / den } else { 0.0 };
    if (signed.abs() - c_abs).abs() > 1e-10 * c_abs.max(1.0) {
        return Err(Error::NotScalar("couplings mix raising and lowering parts".into()));
    }
    Ok(ScalarReduction { epsilon, omega, c: signed })
}

/// `ε|c|` for a scalar-reducible model.
pub fn collapse_rate(model: &PhaseSpaceModel) -> Result<f64> {
    let r = scalar_reduction(model)?;
    if r.c.abs() < 1e-15 {
        return Err(Error::ClassicalLimit);
    }
    Ok(r.rate())
}
