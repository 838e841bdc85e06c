// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

use crate::belavkin::{FilterModel, MeasurementChannel};
use crate::error::{Error, Result};
use crate::gaussian::{ChannelKind, CVector, PhaseChannel, PhaseSpaceModel, RMatrix, RVector};
use crate::operator::{expm, CMatrix, DensityMatrix, Operator, C64};

/// Single mode with `S = −c J`, `Ω = ω I`, one complex channel
/// `ζ = √(ε/2) (1, i)`, vacuum-normalized start `P₀ = I`, `ϑ₀ = 0`.
///
/// `c = 2` is the quantum oscillator, `c = 0` the classical limit and `c < 0`
/// the unstable case.
pub fn open_oscillator(epsilon: f64, omega: f64, c: f64) -> Result<PhaseSpaceModel> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    if !omega.is_finite() || !c.is_finite() {
        return Err(Error::NonFinite);
    }
    let s = RMatrix::from_row_slice(2, 2, &[0.0, -c, c, 0.0]);
    let z = (epsilon / 2.0).sqrt();
    let zeta = CVector::from_vec(vec![C64::new(z, 0.0), C64::new(0.0, z)]);
    PhaseSpaceModel::new(
        s,
        RMatrix::identity(2, 2) * omega,
        RVector::zeros(2),
        vec![PhaseChannel::new(zeta, 1.0, ChannelKind::Complex)],
        RVector::zeros(2),
        RMatrix::identity(2, 2),
    )
}

/// Levels counted as the truncation edge.
pub const EDGE_LEVELS: usize = 3;
/// Largest population allowed on the edge levels.
pub const LEAKAGE_LIMIT: f64 = 1e-6;
/// Extra levels used when building initial states before truncating.
const PAD_LEVELS: usize = 40;

fn lowering(n: usize) -> CMatrix {
    let mut a = CMatrix::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = C64::from((k as f64).sqrt());
    }
    a
}

/// Population on the top [`EDGE_LEVELS`] levels.
pub fn edge_population(rho: &CMatrix) -> f64 {
    let n = rho.nrows();
    (n.saturating_sub(EDGE_LEVELS)..n).map(|k| rho[(k, k)].re).sum()
}

/// Displaced thermal state with quadrature means `(⟨x⟩, ⟨y⟩) = theta` and
/// variance `p ≥ 1` in both, truncated to `n` levels and renormalized.
fn gaussian_state(n: usize, theta: [f64; 2], p: f64) -> Result<CMatrix> {
    if !(p >= 1.0 - 1e-12) {
        return Err(Error::Inadmissible { min_eig: p - 1.0 });
    }
    let big = n + PAD_LEVELS;
    let nbar = (0.5 * (p - 1.0)).max(0.0);
    let mut thermal = CMatrix::zeros(big, big);
    let r = nbar / (1.0 + nbar);
    for k in 0..big {
        thermal[(k, k)] = C64::from(r.powi(k as i32) / (1.0 + nbar));
    }
    let beta = C64::new(theta[0], theta[1]) * 0.5;
    let a = lowering(big);
    let gen = a.adjoint() * beta - &a * beta.conj();
    let d = expm(&gen);
    let full = &d * thermal * d.adjoint();
    let mut rho = full.view((0, 0), (n, n)).into_owned();
    let tr = rho.trace();
    rho /= tr;
    Ok(rho)
}

/// The measured oscillator on a truncated Fock space, with quadratures
/// `x = a + a†`, `y = −i(a − a†)` so that `[x, y] = 2i` as in
/// [`open_oscillator`] with `c = 2`.
#[derive(Debug, Clone)]
pub struct FockBridge {
    pub n_levels: usize,
    pub h: Operator,
    pub channels: Vec<MeasurementChannel>,
    pub x: Operator,
    pub y: Operator,
    pub phase: PhaseSpaceModel,
    pub rho0: DensityMatrix,
}

/// `H = ω(2n̂ + 1)` and `L = √(2ε) a` under heterodyne detection, the
/// Fock-space form of `open_oscillator(ε, ω, 2)`; vacuum start.
pub fn truncated_fock_bridge(n_levels: usize, epsilon: f64, omega: f64) -> Result<FockBridge> {
    if n_levels < 10 {
        return Err(Error::InvalidArgument(format!("n_levels must be at least 10, got {n_levels}")));
    }
    let phase = open_oscillator(epsilon, omega, 2.0)?;
    let a = lowering(n_levels);
    let x = Operator::new(&a + a.adjoint())?;
    let y = Operator::new((&a - a.adjoint()) * C64::new(0.0, -1.0))?;
    let levels: Vec<C64> = (0..n_levels).map(|k| C64::from(omega * (2 * k + 1) as f64)).collect();
    let h = Operator::diagonal(&levels);
    let l = Operator::new(a * C64::from((2.0 * epsilon).sqrt()))?;
    let channels = vec![MeasurementChannel::heterodyne(l, 1.0)];
    let rho0 = DensityMatrix::new(Operator::new(gaussian_state(n_levels, [0.0, 0.0], 1.0)?)?)?;
    let bridge = FockBridge { n_levels, h, channels, x, y, phase, rho0 };
    bridge.check_leakage(bridge.rho0.matrix())?;
    Ok(bridge)
}

impl FockBridge {
    /// Start both sides in the Gaussian state with means `theta` and
    /// covariance `p I`.
    pub fn with_gaussian_initial(mut self, theta: [f64; 2], p: f64) -> Result<Self> {
        let rho = gaussian_state(self.n_levels, theta, p)?;
        self.check_leakage(&rho)?;
        self.rho0 = DensityMatrix::new(Operator::new(rho)?)?;
        self.phase = self.phase.with_initial(RVector::from_vec(theta.to_vec()), RMatrix::identity(2, 2) * p)?;
        Ok(self)
    }

    pub fn filter_model(&self) -> Result<FilterModel> {
        FilterModel::new(self.h.clone(), self.channels.clone())
    }

    pub fn check_leakage(&self, rho: &CMatrix) -> Result<()> {
        let population = edge_population(rho);
        if population > LEAKAGE_LIMIT {
            return Err(Error::Leakage { population, limit: LEAKAGE_LIMIT });
        }
        Ok(())
    }

    /// Quadrature means `(⟨x⟩, ⟨y⟩)` of a normalized state.
    pub fn means(&self, rho: &CMatrix) -> RVector {
        let e = |op: &Operator| (rho * op.matrix()).trace().re;
        RVector::from_vec(vec![e(&self.x), e(&self.y)])
    }

    /// Symmetrized quadrature covariance `½⟨{ΔR_a, ΔR_b}⟩`.
    pub fn covariance(&self, rho: &CMatrix) -> RMatrix {
        let mean = self.means(rho);
        let ops = [self.x.matrix(), self.y.matrix()];
        let mut p = RMatrix::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                let sym = (ops[i] * ops[j] + ops[j] * ops[i]) * C64::from(0.5);
                p[(i, j)] = (rho * sym).trace().re - mean[i] * mean[j];
            }
        }
        p
    }
}
