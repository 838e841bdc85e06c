// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{unvectorize, vectorize, CMatrix, Operator, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionKind {
    Homodyne,
    Heterodyne,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementChannel {
    pub op: Operator,
    pub weight: f64,
    pub kind: DetectionKind,
    /// Channels sharing a label are observed only through their weighted
    /// average. `None` means the channel is its own group.
    pub group: Option<String>,
    /// Unobserved channels contribute dissipation only.
    pub observed: bool,
}

impl MeasurementChannel {
    pub fn homodyne(op: Operator, weight: f64) -> Self {
        Self { op, weight, kind: DetectionKind::Homodyne, group: None, observed: true }
    }

    pub fn heterodyne(op: Operator, weight: f64) -> Self {
        Self { op, weight, kind: DetectionKind::Heterodyne, group: None, observed: true }
    }

    pub fn in_group(mut self, label: impl Into<String>) -> Self {
        self.group = Some(label.into());
        self
    }

    pub fn unobserved(mut self) -> Self {
        self.observed = false;
        self
    }
}

/// One observed signal after averaging over its group.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedChannel {
    pub label: String,
    /// The weight-averaged coupling `L̄`.
    pub op: Operator,
    /// The total group weight `Λ`.
    pub weight: f64,
    pub kind: DetectionKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoarseGrained {
    pub observed: Vec<ObservedChannel>,
    /// Operators `√λ_j (L_j − L̄_{g(j)})`, with `L̄ = 0` for unobserved
    /// channels, whose sandwiches `Σ R ρ R†` make up the dissipation not
    /// carried by the observed signals.
    pub residual: Vec<Operator>,
    /// Every channel is observed in a group of its own.
    pub complete: bool,
}

pub fn validate_channels(dim: usize, channels: &[MeasurementChannel]) -> Result<()> {
    for (index, ch) in channels.iter().enumerate() {
        if ch.op.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: ch.op.dim() });
        }
        if !(ch.weight.is_finite() && ch.weight >= 0.0) {
            return Err(Error::InvalidWeight { index, weight: ch.weight });
        }
    }
    Ok(())
}

pub fn coarse_grain(channels: &[MeasurementChannel]) -> Result<CoarseGrained> {
    let Some(first) = channels.first() else {
        return Ok(CoarseGrained { observed: vec![], residual: vec![], complete: true });
    };
    let dim = first.op.dim();
    validate_channels(dim, channels)?;

    // Groups in order of first appearance.
    let mut labels: Vec<String> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (j, ch) in channels.iter().enumerate() {
        if !ch.observed {
            continue;
        }
        match &ch.group {
            Some(label) => match labels.iter().position(|l| l == label) {
                Some(g) => members[g].push(j),
                None => {
                    labels.push(label.clone());
                    members.push(vec![j]);
                }
            },
            None => {
                labels.push(format!("#{j}"));
                members.push(vec![j]);
            }
        }
    }

    let mut observed = Vec::with_capacity(labels.len());
    let mut averaged: Vec<Option<usize>> = vec![None; channels.len()];
    for (g, (label, idx)) in labels.iter().zip(&members).enumerate() {
        let kind = channels[idx[0]].kind;
        if let Some(&bad) = idx.iter().find(|&&j| channels[j].kind != kind) {
            return Err(Error::KindMismatch(format!("group {label:?} mixes {kind:?} with {:?} (channel {bad})", channels[bad].kind)));
        }
        let total: f64 = idx.iter().map(|&j| channels[j].weight).sum();
        if total <= 0.0 {
            return Err(Error::ZeroWeightGroup(label.clone()));
        }
        let op = if idx.len() == 1 {
            channels[idx[0]].op.clone()
        } else {
            let mut acc = CMatrix::zeros(dim, dim);
            for &j in idx {
                acc += channels[j].op.matrix() * C64::from(channels[j].weight);
            }
            Operator::new(acc / C64::from(total))?
        };
        for &j in idx {
            averaged[j] = Some(g);
        }
        observed.push(ObservedChannel { label: label.clone(), op, weight: total, kind });
    }

    let mut residual = Vec::new();
    for (j, ch) in channels.iter().enumerate() {
        if ch.weight == 0.0 {
            continue;
        }
        let r = match averaged[j] {
            Some(g) if members[g].len() == 1 => continue,
            Some(g) => (ch.op.matrix() - observed[g].op.matrix()) * C64::from(ch.weight.sqrt()),
            None => ch.op.matrix() * C64::from(ch.weight.sqrt()),
        };
        if r.norm() > 0.0 {
            residual.push(Operator::new(r)?);
        }
    }
    if residual.len() > dim * dim {
        residual = compress_dissipator(&residual, dim)?;
    }

    let complete = channels.iter().all(|c| c.observed) && members.iter().all(|m| m.len() == 1);
    Ok(CoarseGrained { observed, residual, complete })
}

/// Rewrites `ρ ↦ Σ R ρ R†` with at most `dim²` operators by diagonalizing the
/// coefficient matrix in the matrix-unit basis. The map is unchanged.
pub fn compress_dissipator(ops: &[Operator], dim: usize) -> Result<Vec<Operator>> {
    let n = dim * dim;
    let mut kossakowski = CMatrix::zeros(n, n);
    for op in ops {
        let v = vectorize(op.matrix());
        kossakowski.ger(C64::from(1.0), &v, &v.conjugate(), C64::from(1.0));
    }
    let eig = SymmetricEigen::new(kossakowski);
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let mut out = Vec::new();
    for (i, &mu) in eig.eigenvalues.iter().enumerate() {
        if mu > 1e-14 * top {
            let u = eig.eigenvectors.column(i).into_owned();
            out.push(Operator::new(unvectorize(&u, dim) * C64::from(mu.sqrt()))?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{ONE, ZERO};

    fn dissipate(ops: &[Operator], rho: &CMatrix) -> CMatrix {
        ops.iter().fold(CMatrix::zeros(rho.nrows(), rho.nrows()), |acc, r| acc + r.matrix() * rho * r.matrix().adjoint())
    }

    #[test]
    fn singleton_groups_are_complete() {
        let chs = vec![
            MeasurementChannel::homodyne(Operator::sigma_x(), 0.5),
            MeasurementChannel::homodyne(Operator::sigma_z(), 2.0),
        ];
        let cg = coarse_grain(&chs).unwrap();
        assert!(cg.complete);
        assert!(cg.residual.is_empty());
        assert_eq!(cg.observed[1].op, Operator::sigma_z());
        assert_eq!(cg.observed[1].weight, 2.0);
    }

    #[test]
    fn opposite_couplings_average_to_zero() {
        let l = Operator::sigma_minus();
        let chs = vec![
            MeasurementChannel::homodyne(l.clone(), 1.0).in_group("g"),
            MeasurementChannel::homodyne(l.scale(-ONE), 1.0).in_group("g"),
        ];
        let cg = coarse_grain(&chs).unwrap();
        assert_eq!(cg.observed.len(), 1);
        assert_eq!(cg.observed[0].op.norm(), 0.0);
        assert_eq!(cg.observed[0].weight, 2.0);
        assert!(!cg.complete);
        let rho = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]);
        let full = l.matrix() * &rho * l.matrix().adjoint() * C64::from(2.0);
        assert!((dissipate(&cg.residual, &rho) - full).norm() < 1e-15);
    }

    #[test]
    fn group_errors() {
        let chs = vec![
            MeasurementChannel::homodyne(Operator::sigma_x(), 0.0).in_group("a"),
            MeasurementChannel::homodyne(Operator::sigma_y(), 0.0).in_group("a"),
        ];
        assert_eq!(coarse_grain(&chs).unwrap_err(), Error::ZeroWeightGroup("a".into()));
        let mixed = vec![
            MeasurementChannel::homodyne(Operator::sigma_x(), 1.0).in_group("a"),
            MeasurementChannel::heterodyne(Operator::sigma_y(), 1.0).in_group("a"),
        ];
        assert!(matches!(coarse_grain(&mixed).unwrap_err(), Error::KindMismatch(_)));
    }

    #[test]
    fn compression_preserves_the_map() {
        let ops: Vec<Operator> = (0..9)
            .map(|k| {
                let t = k as f64;
                Operator::from_rows(2, &[C64::new(t.sin(), 0.1 * t), C64::new(0.3, t.cos()), C64::new(-t, 0.0), C64::new(0.5, -0.2 * t)]).unwrap()
            })
            .collect();
        let compressed = compress_dissipator(&ops, 2).unwrap();
        assert!(compressed.len() <= 4);
        let rho = CMatrix::from_row_slice(2, 2, &[C64::new(0.7, 0.0), C64::new(0.1, 0.2), C64::new(0.1, -0.2), C64::new(0.3, 0.0)]);
        let a = dissipate(&ops, &rho);
        assert!((a.clone() - dissipate(&compressed, &rho)).norm() < 1e-12 * a.norm());
    }
}
