// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{min_eigenvalue_hermitian, CMatrix, C64};

pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;
pub type CVector = DVector<C64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    /// Homodyne-type record `dY` of `L + L†`.
    Real,
    /// Heterodyne-type record `dZ` of `L`.
    Complex,
}

/// Coupling `L = ζᵀR` linear in the canonical coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseChannel {
    pub zeta: CVector,
    pub weight: f64,
    pub observed: bool,
    pub kind: ChannelKind,
}

impl PhaseChannel {
    pub fn new(zeta: CVector, weight: f64, kind: ChannelKind) -> Self {
        Self { zeta, weight, observed: true, kind }
    }

    pub fn unobserved(mut self) -> Self {
        self.observed = false;
        self
    }
}

/// Quadratic Hamiltonian `H = ½ RᵀΩR − υᵀR` with `[R_a, R_b] = −i S_ab` and
/// couplings linear in `R`, started in a Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceModel {
    n_modes: usize,
    s: RMatrix,
    omega: RMatrix,
    upsilon: RVector,
    channels: Vec<PhaseChannel>,
    theta0: RVector,
    p0: RMatrix,
}

/// `⊕ [[0, −1], [1, 0]]`, the form of `[x, p] = i` on each mode.
pub fn canonical_symplectic(n_modes: usize) -> RMatrix {
    let mut s = RMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        s[(2 * k, 2 * k + 1)] = -1.0;
        s[(2 * k + 1, 2 * k)] = 1.0;
    }
    s
}

/// Minimum eigenvalue of the Hermitian matrix `P + (i/2) S`.
pub fn uncertainty_min_eigenvalue(p: &RMatrix, s: &RMatrix) -> f64 {
    let k: CMatrix = p.zip_map(s, |a, b| C64::new(a, 0.5 * b));
    min_eigenvalue_hermitian(&k)
}

fn check_square(name: &str, m: &RMatrix, d: usize) -> Result<()> {
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::InvalidArgument(format!("{name} is {}x{}, expected {d}x{d}", m.nrows(), m.ncols())));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("{name} has non-finite entries")));
    }
    Ok(())
}

fn asymmetry(m: &RMatrix, sign: f64) -> f64 {
    (m - m.transpose() * sign).norm()
}

impl PhaseSpaceModel {
    pub fn new(
        s: RMatrix,
        omega: RMatrix,
        upsilon: RVector,
        channels: Vec<PhaseChannel>,
        theta0: RVector,
        p0: RMatrix,
    ) -> Result<Self> {
        let d = s.nrows();
        if d == 0 || d % 2 != 0 {
            return Err(Error::InvalidArgument(format!("phase-space dimension {d} must be a positive even number")));
        }
        check_square("S", &s, d)?;
        check_square("Omega", &omega, d)?;
        check_square("P0", &p0, d)?;
        if asymmetry(&s, -1.0) > 1e-12 * s.norm().max(1.0) {
            return Err(Error::InvalidArgument("S must be antisymmetric".into()));
        }
        if asymmetry(&omega, 1.0) > 1e-12 * omega.norm().max(1.0) {
            return Err(Error::InvalidArgument("Omega must be symmetric".into()));
        }
        if asymmetry(&p0, 1.0) > 1e-12 * p0.norm().max(1.0) {
            return Err(Error::InvalidArgument("P0 must be symmetric".into()));
        }
        for (name, v) in [("upsilon", &upsilon), ("theta0", &theta0)] {
            if v.len() != d || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be a finite vector of length {d}")));
            }
        }
        for (index, ch) in channels.iter().enumerate() {
            if ch.zeta.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: ch.zeta.len() });
            }
            if !(ch.weight.is_finite() && ch.weight >= 0.0) {
                return Err(Error::InvalidWeight { index, weight: ch.weight });
            }
        }
        let min_eig = uncertainty_min_eigenvalue(&p0, &s);
        if min_eig < -1e-9 {
            return Err(Error::Inadmissible { min_eig });
        }
        Ok(Self { n_modes: d / 2, s, omega, upsilon, channels, theta0, p0 })
    }

    pub fn with_initial(&self, theta0: RVector, p0: RMatrix) -> Result<Self> {
        Self::new(self.s.clone(), self.omega.clone(), self.upsilon.clone(), self.channels.clone(), theta0, p0)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn dim(&self) -> usize {
        2 * self.n_modes
    }

    pub fn s(&self) -> &RMatrix {
        &self.s
    }

    pub fn omega(&self) -> &RMatrix {
        &self.omega
    }

    pub fn upsilon(&self) -> &RVector {
        &self.upsilon
    }

    pub fn channels(&self) -> &[PhaseChannel] {
        &self.channels
    }

    pub fn theta0(&self) -> &RVector {
        &self.theta0
    }

    pub fn p0(&self) -> &RMatrix {
        &self.p0
    }

    /// `E = Σ λ ζ ζ^H` over all channels.
    pub fn coupling_form(&self) -> CMatrix {
        let d = self.dim();
        let mut e = CMatrix::zeros(d, d);
        for ch in &self.channels {
            e += &ch.zeta * ch.zeta.adjoint() * C64::from(ch.weight);
        }
        e
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        file.into_model()
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let file: ModelFile = serde_json::from_value(value).map_err(|e| Error::Format(e.to_string()))?;
        file.into_model()
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(ModelFile::from_model(self)).expect("model file serializes")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum SymplecticSpec {
    Keyword(String),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelFile {
    zeta: Vec<[f64; 2]>,
    weight: f64,
    #[serde(default = "default_true")]
    observed: bool,
    kind: ChannelKind,
}

fn default_true() -> bool {
    true
}

/// The JSON model format. `S` is a matrix or the keyword `"canonical"`;
/// complex entries of `ζ` are `[re, im]` pairs; `upsilon`, `theta0` default to
/// zero and `P0` to the identity.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    n_modes: usize,
    #[serde(rename = "S")]
    s: SymplecticSpec,
    #[serde(rename = "Omega")]
    omega: Vec<Vec<f64>>,
    #[serde(default)]
    upsilon: Option<Vec<f64>>,
    channels: Vec<ChannelFile>,
    #[serde(rename = "P0", default)]
    p0: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    theta0: Option<Vec<f64>>,
}

fn matrix_from_rows(name: &str, rows: &[Vec<f64>], d: usize) -> Result<RMatrix> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Format(format!("{name} must be {d}x{d}")));
    }
    Ok(RMatrix::from_row_iterator(d, d, rows.iter().flatten().cloned()))
}

fn rows_of(m: &RMatrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

impl ModelFile {
    fn into_model(self) -> Result<PhaseSpaceModel> {
        let d = 2 * self.n_modes;
        if d == 0 {
            return Err(Error::Format("n_modes must be at least 1".into()));
        }
        let s = match &self.s {
            SymplecticSpec::Keyword(k) if k == "canonical" => canonical_symplectic(self.n_modes),
            SymplecticSpec::Keyword(k) => return Err(Error::Format(format!("unknown S keyword {k:?}"))),
            SymplecticSpec::Matrix(rows) => matrix_from_rows("S", rows, d)?,
        };
        let omega = matrix_from_rows("Omega", &self.omega, d)?;
        let p0 = match &self.p0 {
            Some(rows) => matrix_from_rows("P0", rows, d)?,
            None => RMatrix::identity(d, d),
        };
        let vector = |name: &str, v: &Option<Vec<f64>>| -> Result<RVector> {
            match v {
                Some(v) if v.len() == d => Ok(RVector::from_column_slice(v)),
                Some(_) => Err(Error::Format(format!("{name} must have length {d}"))),
                None => Ok(RVector::zeros(d)),
            }
        };
        let upsilon = vector("upsilon", &self.upsilon)?;
        let theta0 = vector("theta0", &self.theta0)?;
        let channels = self
            .channels
            .iter()
            .map(|c| PhaseChannel {
                zeta: CVector::from_iterator(c.zeta.len(), c.zeta.iter().map(|[re, im]| C64::new(*re, *im))),
                weight: c.weight,
                observed: c.observed,
                kind: c.kind,
            })
            .collect();
        PhaseSpaceModel::new(s, omega, upsilon, channels, theta0, p0)
    }

    fn from_model(m: &PhaseSpaceModel) -> Self {
        Self {
            n_modes: m.n_modes,
            s: SymplecticSpec::Matrix(rows_of(&m.s)),
            omega: rows_of(&m.omega),
            upsilon: Some(m.upsilon.iter().cloned().collect()),
            channels: m
                .channels
                .iter()
                .map(|c| ChannelFile { zeta: c.zeta.iter().map(|z| [z.re, z.im]).collect(), weight: c.weight, observed: c.observed, kind: c.kind })
                .collect(),
            p0: Some(rows_of(&m.p0)),
            theta0: Some(m.theta0.iter().cloned().collect()),
        }
    }
}
