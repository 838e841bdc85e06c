// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::oscillator::{open_oscillator, truncated_fock_bridge};
use super::spin::{spin_sphere_system, SpinOptions};
use crate::belavkin::{DetectionKind, FilterModel, MeasurementChannel};
use crate::error::{Error, Result};
use crate::gaussian::PhaseSpaceModel;
use crate::operator::{CMatrix, DensityMatrix, Operator, C64};
use crate::stochastic::TimeGrid;

/// A model for the finite-dimensional filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSystem {
    pub h: Operator,
    pub channels: Vec<MeasurementChannel>,
    pub rho0: DensityMatrix,
}

impl FiniteSystem {
    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn filter_model(&self) -> Result<FilterModel> {
        FilterModel::new(self.h.clone(), self.channels.clone())
    }

    pub fn to_value(&self) -> serde_json::Value {
        let file = FiniteFile {
            dim: self.dim(),
            h: rows_of(self.h.matrix()),
            channels: self
                .channels
                .iter()
                .map(|c| ChannelFile {
                    op: rows_of(c.op.matrix()),
                    weight: c.weight,
                    kind: c.kind,
                    group: c.group.clone(),
                    observed: c.observed,
                })
                .collect(),
            rho0: rows_of(self.rho0.matrix()),
        };
        serde_json::to_value(file).expect("finite model serializes")
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let file: FiniteFile = serde_json::from_value(value).map_err(|e| Error::Format(e.to_string()))?;
        let d = file.dim;
        let channels = file
            .channels
            .into_iter()
            .map(|c| {
                Ok(MeasurementChannel {
                    op: matrix_from_rows("channels.op", &c.op, d)?,
                    weight: c.weight,
                    kind: c.kind,
                    group: c.group,
                    observed: c.observed,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let system = Self {
            h: matrix_from_rows("H", &file.h, d)?,
            channels,
            rho0: DensityMatrix::normalized(matrix_from_rows("rho0", &file.rho0, d)?)?,
        };
        system.filter_model()?;
        Ok(system)
    }
}

type Rows = Vec<Vec<[f64; 2]>>;

fn rows_of(m: &CMatrix) -> Rows {
    m.row_iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect()
}

fn matrix_from_rows(name: &str, rows: &Rows, d: usize) -> Result<Operator> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Format(format!("{name} must be {d}x{d}")));
    }
    let entries: Vec<C64> = rows.iter().flatten().map(|[re, im]| C64::new(*re, *im)).collect();
    Operator::from_rows(d, &entries)
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelFile {
    op: Rows,
    weight: f64,
    kind: DetectionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    group: Option<String>,
    #[serde(default = "default_true")]
    observed: bool,
}

/// JSON form of a finite model; complex entries are `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FiniteFile {
    dim: usize,
    #[serde(rename = "H")]
    h: Rows,
    channels: Vec<ChannelFile>,
    rho0: Rows,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSystem {
    Finite(FiniteSystem),
    PhaseSpace(PhaseSpaceModel),
}

/// A runnable model: the system, a default time grid and a short description.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub system: ModelSystem,
    pub grid: TimeGrid,
    pub description: String,
}

impl ModelSpec {
    pub fn finite(&self) -> Option<&FiniteSystem> {
        match &self.system {
            ModelSystem::Finite(f) => Some(f),
            ModelSystem::PhaseSpace(_) => None,
        }
    }

    pub fn phase_space(&self) -> Option<&PhaseSpaceModel> {
        match &self.system {
            ModelSystem::PhaseSpace(p) => Some(p),
            ModelSystem::Finite(_) => None,
        }
    }

    /// `{"finite": …}` or `{"phase_space": …}` in the respective model format.
    pub fn system_value(&self) -> serde_json::Value {
        match &self.system {
            ModelSystem::Finite(f) => serde_json::json!({ "finite": f.to_value() }),
            ModelSystem::PhaseSpace(p) => serde_json::json!({ "phase_space": p.to_value() }),
        }
    }

    pub fn from_system_value(name: &str, value: serde_json::Value, grid: TimeGrid) -> Result<Self> {
        let serde_json::Value::Object(mut map) = value else {
            return Err(Error::Format("model must be an object".into()));
        };
        let system = match (map.remove("finite"), map.remove("phase_space")) {
            (Some(f), None) if map.is_empty() => ModelSystem::Finite(FiniteSystem::from_value(f)?),
            (None, Some(p)) if map.is_empty() => ModelSystem::PhaseSpace(PhaseSpaceModel::from_value(p)?),
            _ => return Err(Error::Format("model needs exactly one of \"finite\" or \"phase_space\"".into())),
        };
        grid.validate()?;
        Ok(Self { name: name.to_string(), system, grid, description: "inline model".into() })
    }
}

fn spin_spec(name: String, n_bands: usize, opts: &SpinOptions, description: String) -> Result<ModelSpec> {
    let (h, channels, rho0) = spin_sphere_system(n_bands, opts)?;
    let system = FiniteSystem { h, channels, rho0 };
    system.filter_model()?;
    Ok(ModelSpec { name, system: ModelSystem::Finite(system), grid: TimeGrid::new(0.0, 1.0, 1000)?, description })
}

/// Spin-½ measured along all directions, the record averaged over
/// `n_patches` equal-area polar bands, homodyne detection, default options.
pub fn spin_half_sphere(n_patches: usize) -> Result<ModelSpec> {
    spin_half_sphere_with(n_patches, &SpinOptions::default())
}

pub fn spin_half_sphere_with(n_patches: usize, opts: &SpinOptions) -> Result<ModelSpec> {
    if n_patches < 1 {
        return Err(Error::InvalidArgument("n_patches must be at least 1".into()));
    }
    let what = if opts.complete { "every direction observed".to_string() } else { format!("{n_patches} polar bands") };
    spin_spec(
        format!("spin-sphere:{n_patches}"),
        n_patches,
        opts,
        format!("spin-1/2 under solid-angle measurement of spin projections, {what}, kappa = {}, omega = {}", opts.kappa, opts.omega),
    )
}

pub fn oscillator_spec(name: &str, epsilon: f64, omega: f64, c: f64) -> Result<ModelSpec> {
    Ok(ModelSpec {
        name: name.to_string(),
        system: ModelSystem::PhaseSpace(open_oscillator(epsilon, omega, c)?),
        grid: TimeGrid::new(0.0, 3.0, 3000)?,
        description: format!("single-mode open oscillator, epsilon = {epsilon}, omega = {omega}, c = {c}"),
    })
}

/// Names accepted by [`catalog`]. `spin-sphere:N` takes any band count.
pub const CATALOG: &[&str] = &[
    "spin-hemispheres",
    "spin-hemispheres-heterodyne",
    "spin-complete",
    "spin-sphere:N",
    "oscillator-quantum",
    "oscillator-unit",
    "oscillator-classical",
    "oscillator-unstable",
    "fock-bridge",
];

pub fn catalog(name: &str) -> Result<ModelSpec> {
    let spin = |n: usize, opts: SpinOptions| -> Result<ModelSpec> {
        let mut spec = spin_half_sphere_with(n, &opts)?;
        spec.name = name.to_string();
        Ok(spec)
    };
    match name {
        "spin-hemispheres" => spin(2, SpinOptions::default()),
        "spin-hemispheres-heterodyne" => spin(2, SpinOptions { kind: DetectionKind::Heterodyne, ..Default::default() }),
        "spin-complete" => spin(1, SpinOptions { complete: true, ..Default::default() }),
        "oscillator-quantum" => oscillator_spec(name, 1.0, 0.0, 2.0),
        "oscillator-unit" => oscillator_spec(name, 1.0, 0.0, 1.0),
        "oscillator-classical" => oscillator_spec(name, 1.0, 0.0, 0.0),
        "oscillator-unstable" => oscillator_spec(name, 1.0, 0.5, -2.0),
        "fock-bridge" => {
            let b = truncated_fock_bridge(30, 1.0, 0.5)?;
            let system = FiniteSystem { h: b.h, channels: b.channels, rho0: b.rho0 };
            Ok(ModelSpec {
                name: name.to_string(),
                system: ModelSystem::Finite(system),
                grid: TimeGrid::new(0.0, 3.0, 30000)?,
                description: "open oscillator on 30 Fock levels, heterodyne, epsilon = 1, omega = 0.5, vacuum start".into(),
            })
        }
        _ => match name.strip_prefix("spin-sphere:").map(str::parse::<usize>) {
            Some(Ok(n)) => spin(n, SpinOptions::default()),
            _ => Err(Error::InvalidArgument(format!("unknown model {name:?}; known: {}", CATALOG.join(", ")))),
        },
    }
}
