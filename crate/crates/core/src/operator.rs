// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

//! Dense operators on a finite Hilbert space, the Lindblad generator in both
//! pictures, and the exact superoperator propagator.
//!
//! Superoperators act on column-major vectorized matrices, so that
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Largest Hilbert-space dimension accepted by [`exact_lindblad_propagate`].
pub const DEFAULT_DIM_CAP: usize = 64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);
const HALF: C64 = C64::new(0.5, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    m: CMatrix,
}

impl Operator {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() == 0 {
            return Err(Error::InvalidArgument("operator dimension must be at least 1".into()));
        }
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { m })
    }

    /// Row-major entries.
    pub fn from_rows(dim: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        Self::new(CMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn identity(dim: usize) -> Self {
        Self { m: CMatrix::identity(dim, dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { m: CMatrix::zeros(dim, dim) }
    }

    pub fn diagonal(values: &[C64]) -> Self {
        Self { m: CMatrix::from_diagonal(&DVector::from_column_slice(values)) }
    }

    pub fn sigma_x() -> Self {
        Self { m: CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]) }
    }

    pub fn sigma_y() -> Self {
        Self { m: CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]) }
    }

    pub fn sigma_z() -> Self {
        Self { m: CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]) }
    }

    /// Lowering operator with basis order (excited, ground).
    pub fn sigma_minus() -> Self {
        Self { m: CMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ONE, ZERO]) }
    }

    pub fn sigma_plus() -> Self {
        Self::sigma_minus().adjoint()
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn adjoint(&self) -> Self {
        Self { m: self.m.adjoint() }
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { m: &self.m * z }
    }

    pub fn norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (&self.m - self.m.adjoint()).norm() <= tol
    }

    fn check_same_dim(&self, other: &Operator) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }
}

// The arithmetic operators panic on mismatched dimensions, like the
// underlying matrices; the fallible entry points check first.
impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator { m: &self.m + &rhs.m }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator { m: &self.m - &rhs.m }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator { m: &self.m * &rhs.m }
    }
}

pub fn commutator(a: &Operator, b: &Operator) -> Result<Operator> {
    a.check_same_dim(b)?;
    Ok(Operator { m: &a.m * &b.m - &b.m * &a.m })
}

/// Replaces `m` by its Hermitian part `(m + m†)/2`.
pub fn repair_hermitian(m: &mut CMatrix) {
    let n = m.nrows();
    for j in 0..n {
        m[(j, j)].im = 0.0;
        for i in (j + 1)..n {
            let z = (m[(i, j)] + m[(j, i)].conj()) * HALF;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
}

/// Smallest eigenvalue of a Hermitian matrix. Only the lower triangle is read
/// for dimensions above 2.
pub fn min_eigenvalue_hermitian(m: &CMatrix) -> f64 {
    match m.nrows() {
        0 => f64::NAN,
        1 => m[(0, 0)].re,
        2 => {
            let a = m[(0, 0)].re;
            let d = m[(1, 1)].re;
            let b = m[(1, 0)];
            let half = 0.5 * (a - d);
            0.5 * (a + d) - (half * half + b.norm_sqr()).sqrt()
        }
        _ => SymmetricEigen::new(m.clone()).eigenvalues.min(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    /// Accepts any Hermitian positive semidefinite operator with positive trace.
    pub fn new(op: Operator) -> Result<Self> {
        let scale = op.norm().max(f64::MIN_POSITIVE);
        if !op.is_hermitian(1e-12 * scale) {
            return Err(Error::InvalidArgument("density matrix is not Hermitian".into()));
        }
        let tr = op.trace().re;
        if tr <= 0.0 {
            return Err(Error::InvalidArgument(format!("density matrix trace {tr} is not positive")));
        }
        let min_eig = min_eigenvalue_hermitian(op.matrix());
        if min_eig < -1e-10 * tr {
            return Err(Error::NotPositive { step: 0, min_eig });
        }
        Ok(Self { op })
    }

    /// As [`DensityMatrix::new`], additionally requiring unit trace.
    pub fn normalized(op: Operator) -> Result<Self> {
        let tr = op.trace();
        if (tr - ONE).norm() > 1e-10 {
            return Err(Error::InvalidArgument(format!("trace {tr} is not 1")));
        }
        Self::new(op)
    }

    pub fn pure(psi: &[C64]) -> Result<Self> {
        let v = DVector::from_column_slice(psi);
        let n2 = v.norm_squared();
        if !(n2 > 0.0 && n2.is_finite()) {
            return Err(Error::InvalidArgument("state vector has zero or non-finite norm".into()));
        }
        let m = &v * v.adjoint() / C64::from(n2);
        Ok(Self { op: Operator::new(m)? })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { op: Operator::identity(dim).scale(C64::from(1.0 / dim as f64)) }
    }

    /// No validation; used where the matrix comes out of an exact propagator
    /// whose round-off the caller is expected to inspect.
    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        Self { op: Operator { m } }
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.op.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.op.m
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn trace(&self) -> f64 {
        self.op.trace().re
    }

    /// `tr(ρ²)/tr(ρ)²`, i.e. the purity of the normalized state.
    pub fn purity(&self) -> f64 {
        let tr = self.trace();
        self.op.m.iter().map(|z| z.norm_sqr()).sum::<f64>() / (tr * tr)
    }

    /// `tr(X ρ)`.
    pub fn expectation(&self, x: &Operator) -> C64 {
        trace_product(x.matrix(), &self.op.m)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue_hermitian(&self.op.m)
    }
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn vectorize(m: &CMatrix) -> DVector<C64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &DVector<C64>, dim: usize) -> CMatrix {
    CMatrix::from_column_slice(dim, dim, v.as_slice())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    dim: usize,
    m: CMatrix,
}

impl Superoperator {
    pub fn from_matrix(dim: usize, m: CMatrix) -> Result<Self> {
        if m.nrows() != dim * dim || m.ncols() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: m.nrows() });
        }
        Ok(Self { dim, m })
    }

    /// The map `X ↦ A X B`.
    pub fn sandwich(a: &CMatrix, b: &CMatrix) -> Self {
        Self { dim: a.nrows(), m: b.transpose().kronecker(a) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        unvectorize(&(&self.m * vectorize(x)), self.dim)
    }
}

/// Heisenberg generator together with its trace-pairing dual.
#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    pub heisenberg: Superoperator,
    pub schrodinger: Superoperator,
}

fn check_channels(h: &Operator, channels: &[(Operator, f64)]) -> Result<()> {
    for (index, (l, w)) in channels.iter().enumerate() {
        h.check_same_dim(l)?;
        if !(w.is_finite() && *w >= 0.0) {
            return Err(Error::InvalidWeight { index, weight: *w });
        }
    }
    Ok(())
}

pub fn lindblad_generator(h: &Operator, channels: &[(Operator, f64)]) -> Result<LindbladGenerator> {
    check_channels(h, channels)?;
    let n = h.dim();
    let id = CMatrix::identity(n, n);
    let hm = h.matrix();
    let mut heis = (id.kronecker(hm) - hm.transpose().kronecker(&id)) * I;
    let mut schr = (id.kronecker(hm) - hm.transpose().kronecker(&id)) * (-I);
    for (l, w) in channels {
        let l = l.matrix();
        let ldl = l.adjoint() * l;
        let anti = id.kronecker(&ldl) + ldl.transpose().kronecker(&id);
        let w = C64::from(*w);
        heis += (l.transpose().kronecker(&l.adjoint()) - &anti * HALF) * w;
        schr += (l.conjugate().kronecker(l) - &anti * HALF) * w;
    }
    Ok(LindbladGenerator {
        heisenberg: Superoperator { dim: n, m: heis },
        schrodinger: Superoperator { dim: n, m: schr },
    })
}

/// `i[H,X] + Σ λ (L†XL − ½{L†L, X})`, evaluated directly on matrices.
pub fn heisenberg_action(h: &Operator, channels: &[(Operator, f64)], x: &Operator) -> Result<Operator> {
    check_channels(h, channels)?;
    h.check_same_dim(x)?;
    let (hm, xm) = (h.matrix(), x.matrix());
    let mut out = (hm * xm - xm * hm) * I;
    for (l, w) in channels {
        let l = l.matrix();
        let ld = l.adjoint();
        let ldl = &ld * l;
        out += (&ld * xm * l - (&ldl * xm + xm * &ldl) * HALF) * C64::from(*w);
    }
    Operator::new(out)
}

/// `−i[H,ρ] + Σ λ (LρL† − ½{L†L, ρ})`.
pub fn schrodinger_action(h: &CMatrix, channels: &[(CMatrix, f64)], rho: &CMatrix) -> CMatrix {
    let mut out = (h * rho - rho * h) * (-I);
    for (l, w) in channels {
        let ld = l.adjoint();
        let ldl = &ld * l;
        out += (l * rho * &ld - (&ldl * rho + rho * &ldl) * HALF) * C64::from(*w);
    }
    out
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(m: &CMatrix) -> CMatrix {
    m.clone().exp()
}

pub fn exact_lindblad_propagate(rho0: &DensityMatrix, generator: &Superoperator, t: f64) -> Result<DensityMatrix> {
    exact_lindblad_propagate_capped(rho0, generator, t, DEFAULT_DIM_CAP)
}

pub fn exact_lindblad_propagate_capped(
    rho0: &DensityMatrix,
    generator: &Superoperator,
    t: f64,
    cap: usize,
) -> Result<DensityMatrix> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("propagation time {t} must be finite and nonnegative")));
    }
    if generator.dim > cap {
        return Err(Error::TooLarge { dim: generator.dim, cap });
    }
    if rho0.dim() != generator.dim {
        return Err(Error::DimensionMismatch { expected: generator.dim, found: rho0.dim() });
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let prop = expm(&(&generator.m * C64::from(t)));
    let v = prop * vectorize(rho0.matrix());
    Ok(DensityMatrix::from_matrix_unchecked(unvectorize(&v, generator.dim)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn pauli_commutators() {
        let xy = commutator(&Operator::sigma_x(), &Operator::sigma_y()).unwrap();
        assert!(close(xy.matrix(), &(Operator::sigma_z().matrix() * (I * 2.0)), 1e-15));
        let zm = commutator(&Operator::sigma_z(), &Operator::sigma_minus()).unwrap();
        assert!(close(zm.matrix(), &(Operator::sigma_minus().matrix() * C64::from(-2.0)), 1e-15));
        let aa = commutator(&Operator::sigma_y(), &Operator::sigma_y()).unwrap();
        assert!(aa.norm() == 0.0);
    }

    #[test]
    fn commutator_rejects_mismatch() {
        let err = commutator(&Operator::identity(2), &Operator::identity(3)).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 2, found: 3 });
    }

    #[test]
    fn decay_generator_on_sigma_z() {
        let ch = vec![(Operator::sigma_minus(), 1.0)];
        let g = heisenberg_action(&Operator::zeros(2), &ch, &Operator::sigma_z()).unwrap();
        let expected = -(CMatrix::identity(2, 2) + Operator::sigma_z().matrix());
        assert!(close(g.matrix(), &expected, 1e-15));

        let gen = lindblad_generator(&Operator::zeros(2), &ch).unwrap();
        let via_super = gen.heisenberg.apply(Operator::sigma_z().matrix());
        assert!(close(&via_super, &expected, 1e-15));
    }

    #[test]
    fn closed_system_generator() {
        let h = Operator::sigma_x().scale(C64::from(0.7));
        let x = Operator::sigma_y();
        let g = heisenberg_action(&h, &[], &x).unwrap();
        let expected = commutator(&h, &x).unwrap().scale(I);
        assert!(close(g.matrix(), expected.matrix(), 1e-15));
    }

    #[test]
    fn exact_decay_population() {
        let ch = vec![(Operator::sigma_minus(), 1.0)];
        let gen = lindblad_generator(&Operator::zeros(2), &ch).unwrap();
        let rho0 = DensityMatrix::pure(&[ONE, ZERO]).unwrap();
        for &t in &[0.0, 0.3, 1.0, 2.5] {
            let rho = exact_lindblad_propagate(&rho0, &gen.schrodinger, t).unwrap();
            assert_relative_eq!(rho.matrix()[(0, 0)].re, (-t).exp(), max_relative = 1e-12);
            assert_relative_eq!(rho.trace(), 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn propagate_refuses_large_dim() {
        let gen = lindblad_generator(&Operator::zeros(4), &[]).unwrap();
        let rho0 = DensityMatrix::maximally_mixed(4);
        let err = exact_lindblad_propagate_capped(&rho0, &gen.schrodinger, 1.0, 3).unwrap_err();
        assert_eq!(err, Error::TooLarge { dim: 4, cap: 3 });
    }

    #[test]
    fn negative_weight_rejected() {
        let err = lindblad_generator(&Operator::zeros(2), &[(Operator::sigma_z(), -1.0)]).unwrap_err();
        assert!(matches!(err, Error::InvalidWeight { index: 0, .. }));
    }

    #[test]
    fn two_by_two_min_eigenvalue_matches_general_path() {
        let m = CMatrix::from_row_slice(2, 2, &[C64::new(0.3, 0.0), C64::new(0.1, -0.4), C64::new(0.1, 0.4), C64::new(-0.2, 0.0)]);
        let general = SymmetricEigen::new(m.clone()).eigenvalues.min();
        assert_relative_eq!(min_eigenvalue_hermitian(&m), general, epsilon = 1e-14);
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(Operator::sigma_z()).is_err());
        assert!(DensityMatrix::new(Operator::sigma_y()).is_err());
        assert!(DensityMatrix::normalized(Operator::identity(2)).is_err());
        let rho = DensityMatrix::normalized(Operator::identity(2).scale(C64::from(0.5))).unwrap();
        assert_relative_eq!(rho.purity(), 0.5, epsilon = 1e-15);
    }
}
