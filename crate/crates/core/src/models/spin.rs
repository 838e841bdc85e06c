// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::belavkin::{DetectionKind, MeasurementChannel};
use crate::error::{Error, Result};
use crate::operator::{DensityMatrix, Operator, C64};

/// Gauss–Legendre nodes and weights on `[−1, 1]` (Golub–Welsch).
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::<f64>::zeros(order, order);
    for k in 1..order {
        let b = k as f64 / ((4 * k * k - 1) as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|k| (eig.eigenvalues[k], 2.0 * eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Spin projection `x·σ` along a unit direction.
pub fn spin_projection(dir: [f64; 3]) -> Operator {
    let [x, y, z] = dir;
    Operator::from_rows(2, &[C64::new(z, 0.0), C64::new(x, -y), C64::new(x, y), C64::new(-z, 0.0)])
        .expect("2x2 entries")
}

/// Quadrature node on the sphere with its solid-angle weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereNode {
    pub dir: [f64; 3],
    pub weight: f64,
    pub band: usize,
}

/// Nodes of the product rule on `n_bands` equal-area polar bands: in each
/// band, `order` Gauss–Legendre points in `cos θ` times `order` equally
/// spaced azimuths. Band 0 is the one around the north pole.
pub fn sphere_nodes(n_bands: usize, order: usize) -> Result<Vec<SphereNode>> {
    if n_bands < 1 {
        return Err(Error::InvalidArgument("the sphere needs at least one band".into()));
    }
    if order < 1 {
        return Err(Error::InvalidArgument("quadrature order must be at least 1".into()));
    }
    let (gx, gw) = gauss_legendre(order);
    let width = 2.0 / n_bands as f64;
    let dphi = 2.0 * PI / order as f64;
    let mut nodes = Vec::with_capacity(n_bands * order * order);
    for band in 0..n_bands {
        let top = 1.0 - width * band as f64;
        let mid = top - 0.5 * width;
        for (&x, &w) in gx.iter().zip(&gw) {
            let cos_t = mid + 0.5 * width * x;
            let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
            for j in 0..order {
                let phi = (j as f64 + 0.5) * dphi;
                nodes.push(SphereNode {
                    dir: [sin_t * phi.cos(), sin_t * phi.sin(), cos_t],
                    weight: 0.5 * width * w * dphi,
                    band,
                });
            }
        }
    }
    Ok(nodes)
}

/// Options of the measured spin-½ model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpinOptions {
    /// Measurement strength: `L_x = (√κ/2) x·σ`.
    pub kappa: f64,
    /// Precession `H = (ω/2) σ_x`.
    pub omega: f64,
    pub order: usize,
    pub kind: DetectionKind,
    /// Observe every quadrature direction separately instead of band averages.
    pub complete: bool,
}

impl Default for SpinOptions {
    fn default() -> Self {
        Self { kappa: 0.25, omega: 1.0, order: 50, kind: DetectionKind::Homodyne, complete: false }
    }
}

/// Hamiltonian, channels and initial state `|0⟩⟨0|` of a spin-½ measured along
/// every direction of the sphere with solid-angle weight, the record
/// coarse-grained to `n_bands` polar bands.
pub fn spin_sphere_system(n_bands: usize, opts: &SpinOptions) -> Result<(Operator, Vec<MeasurementChannel>, DensityMatrix)> {
    if !(opts.kappa.is_finite() && opts.kappa >= 0.0) || !opts.omega.is_finite() {
        return Err(Error::InvalidArgument("spin model needs finite ω and κ >= 0".into()));
    }
    let amp = C64::from(0.5 * opts.kappa.sqrt());
    let nodes = sphere_nodes(n_bands, opts.order)?;
    let channels = nodes
        .iter()
        .enumerate()
        .map(|(k, node)| {
            let op = spin_projection(node.dir).scale(amp);
            let ch = match opts.kind {
                DetectionKind::Homodyne => MeasurementChannel::homodyne(op, node.weight),
                DetectionKind::Heterodyne => MeasurementChannel::heterodyne(op, node.weight),
            };
            if opts.complete {
                ch.in_group(format!("node{k}"))
            } else {
                ch.in_group(format!("band{}", node.band))
            }
        })
        .collect();
    let h = Operator::sigma_x().scale(C64::from(0.5 * opts.omega));
    let rho0 = DensityMatrix::pure(&[C64::from(1.0), C64::from(0.0)])?;
    Ok((h, channels, rho0))
}
