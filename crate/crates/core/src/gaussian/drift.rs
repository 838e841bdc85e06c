// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

use super::model::{ChannelKind, CVector, PhaseSpaceModel, RMatrix, RVector};
use crate::operator::{CMatrix, C64};

/// A real-record signal `dY = λ cᵀϑ dt + dw` with `c = 2 Re ζ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSignal {
    pub zeta: CVector,
    pub c: RVector,
    /// `Im ζ`.
    pub m: RVector,
    pub weight: f64,
}

impl RealSignal {
    fn new(zeta: CVector, weight: f64) -> Self {
        Self { c: zeta.map(|z| 2.0 * z.re), m: zeta.map(|z| z.im), zeta, weight }
    }
}

/// A complex-record signal `dZ = λ ζᵀϑ dt + dW`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    pub zeta: CVector,
    pub weight: f64,
}

/// Coordinate matrices of the filter equations, fixed for a model.
///
/// `drift` is `A = S(Im E − Ω)` and `diffusion` is `D = −S Re E S` with
/// `E = Σ λ ζ ζ^H`, so that the unconditional moments obey
/// `dϑ/dt = Aϑ + Sυ` and `dP/dt = AP + PAᵀ + D`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftData {
    pub s: RMatrix,
    pub drift: RMatrix,
    pub diffusion: RMatrix,
    /// `Sυ`.
    pub source: RVector,
    /// Observed signals in record order, tagged by kind.
    pub layout: Vec<ChannelKind>,
    pub real: Vec<RealSignal>,
    pub complex: Vec<ComplexSignal>,
    /// Every observed signal as real records; a complex signal `ζ` becomes
    /// the pair `ζ/√2`, `−iζ/√2` with the same weight.
    pub expanded: Vec<RealSignal>,
    /// `Σ λ c cᵀ` over the expanded signals.
    pub mu_bar: RMatrix,
    /// `A − S Σ λ (Im ζ) cᵀ` over the expanded signals.
    pub kappa_tilde: RMatrix,
    /// `D − S (Σ λ (Im ζ)(Im ζ)ᵀ) Sᵀ` over the expanded signals.
    pub epsilon_tilde: RMatrix,
}

impl DriftData {
    pub fn new(model: &PhaseSpaceModel) -> Self {
        let d = model.dim();
        let s = model.s().clone();
        let e = model.coupling_form();
        let drift = &s * (e.map(|z| z.im) - model.omega());
        let diffusion = -(&s * e.map(|z| z.re) * &s);
        let source = &s * model.upsilon();

        let mut layout = Vec::new();
        let mut real = Vec::new();
        let mut complex = Vec::new();
        let mut expanded = Vec::new();
        for ch in model.channels().iter().filter(|c| c.observed) {
            layout.push(ch.kind);
            match ch.kind {
                ChannelKind::Real => {
                    real.push(RealSignal::new(ch.zeta.clone(), ch.weight));
                    expanded.push(RealSignal::new(ch.zeta.clone(), ch.weight));
                }
                ChannelKind::Complex => {
                    complex.push(ComplexSignal { zeta: ch.zeta.clone(), weight: ch.weight });
                    let r = std::f64::consts::FRAC_1_SQRT_2;
                    expanded.push(RealSignal::new(&ch.zeta * C64::from(r), ch.weight));
                    expanded.push(RealSignal::new(&ch.zeta * C64::new(0.0, -r), ch.weight));
                }
            }
        }

        let mut mu_bar = RMatrix::zeros(d, d);
        let mut n = RMatrix::zeros(d, d);
        let mut mm = RMatrix::zeros(d, d);
        for sig in &expanded {
            mu_bar += &sig.c * sig.c.transpose() * sig.weight;
            n += &sig.m * sig.c.transpose() * sig.weight;
            mm += &sig.m * sig.m.transpose() * sig.weight;
        }
        let kappa_tilde = &drift - &s * n;
        let epsilon_tilde = &diffusion - &s * mm * s.transpose();
        Self { s, drift, diffusion, source, layout, real, complex, expanded, mu_bar, kappa_tilde, epsilon_tilde }
    }

    pub fn dim(&self) -> usize {
        self.s.nrows()
    }

    /// Reals per step: one per real signal, `(Re dZ, Im dZ)` per complex one.
    pub fn record_width(&self) -> usize {
        self.layout.iter().map(|k| kind_width(*k)).sum()
    }

    /// Reference noise variances per unit time, `λ` for each real column and
    /// `λ, λ` for the quadratures `dw±` of each complex signal.
    pub fn noise_weights(&self) -> Vec<f64> {
        let (mut ri, mut ci) = (0, 0);
        let mut w = Vec::new();
        for kind in &self.layout {
            match kind {
                ChannelKind::Real => {
                    w.push(self.real[ri].weight);
                    ri += 1;
                }
                ChannelKind::Complex => {
                    w.extend([self.complex[ci].weight; 2]);
                    ci += 1;
                }
            }
        }
        w
    }

    /// `K = P + (i/2) S`.
    pub fn k_matrix(&self, p: &RMatrix) -> CMatrix {
        p.zip_map(&self.s, |a, b| C64::new(a, 0.5 * b))
    }

    /// Real gain `2 Re[(P + (i/2)S) ζ̄] = 2P Re ζ + S Im ζ`.
    pub fn real_gain(&self, p: &RMatrix, sig: &RealSignal) -> RVector {
        p * &sig.c + &self.s * &sig.m
    }

    /// Complex gain `(P + (i/2)S) ζ̄`.
    pub fn complex_gain(&self, p: &RMatrix, sig: &ComplexSignal) -> CVector {
        self.k_matrix(p) * sig.zeta.conjugate()
    }
}

pub(crate) fn kind_width(kind: ChannelKind) -> usize {
    match kind {
        ChannelKind::Real => 1,
        ChannelKind::Complex => 2,
    }
}
