// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::channel::DetectionKind;
use super::filter::{kind_width, FilterModel, FilterOptions, FilterState};
use crate::error::{Error, Result};
use crate::operator::{trace_product, DensityMatrix};
use crate::stochastic::{SeedPolicy, TimeGrid, WienerStream};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordMode {
    /// Increments drawn from the posterior's own predictive law.
    #[default]
    SimulatePhysical,
    /// Increments read from a stored record.
    ReplayGiven,
    /// Increments are the raw reference noise.
    ReferenceMeasure,
}

/// Per-step observed increments, `width` reals per step laid out as in
/// [`FilterModel::record_width`].
#[derive(Debug, Clone, PartialEq)]
pub struct OutputRecord {
    pub mode: RecordMode,
    pub width: usize,
    pub data: Vec<f64>,
}

impl OutputRecord {
    pub fn new(mode: RecordMode, width: usize) -> Self {
        Self { mode, width, data: Vec::new() }
    }

    pub fn n_steps(&self) -> usize {
        self.data.len().checked_div(self.width).unwrap_or(0)
    }

    pub fn step(&self, k: usize) -> &[f64] {
        &self.data[k * self.width..(k + 1) * self.width]
    }

    pub fn push(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.width);
        self.data.extend_from_slice(row);
    }
}

/// Physical-law increments given the current posterior:
/// `dY = Λ tr(ρ(L̄ + L̄†)) dt + dw` and `dZ = Λ tr(ρ L̄) dt + (dw₊ + i dw₋)/√2`.
pub fn simulate_output(state: &FilterState, model: &FilterModel, noise: &[f64], dt: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; model.record_width()];
    simulate_output_into(state, model, noise, dt, &mut out)?;
    Ok(out)
}

pub fn simulate_output_into(state: &FilterState, model: &FilterModel, noise: &[f64], dt: f64, out: &mut [f64]) -> Result<()> {
    let width = model.record_width();
    if noise.len() != width {
        return Err(Error::IncrementCount { expected: width, found: noise.len() });
    }
    let tr = state.trace();
    if !(tr > 0.0 && tr.is_finite()) {
        return Err(Error::TraceUnderflow { step: state.step_index(), trace: tr });
    }
    let rho = state.normalized_matrix();
    let mut pos = 0;
    for (o, l) in model.observed().iter().zip(model.obs_ops()) {
        let mean = trace_product(&rho, l) * o.weight * dt;
        match o.kind {
            DetectionKind::Homodyne => out[pos] = 2.0 * mean.re + noise[pos],
            DetectionKind::Heterodyne => {
                out[pos] = mean.re + noise[pos] * std::f64::consts::FRAC_1_SQRT_2;
                out[pos + 1] = mean.im + noise[pos + 1] * std::f64::consts::FRAC_1_SQRT_2;
            }
        }
        pos += kind_width(o.kind);
    }
    Ok(())
}

/// Reference-measure increments: `dY = dw` and `dZ = (dw₊ + i dw₋)/√2`.
pub fn reference_output_into(model: &FilterModel, noise: &[f64], out: &mut [f64]) {
    let mut pos = 0;
    for o in model.observed() {
        match o.kind {
            DetectionKind::Homodyne => out[pos] = noise[pos],
            DetectionKind::Heterodyne => {
                out[pos] = noise[pos] * std::f64::consts::FRAC_1_SQRT_2;
                out[pos + 1] = noise[pos + 1] * std::f64::consts::FRAC_1_SQRT_2;
            }
        }
        pos += kind_width(o.kind);
    }
}

/// Everything needed to run one trajectory except its index.
#[derive(Debug, Clone)]
pub struct TrajectorySetup<'a> {
    pub model: &'a FilterModel,
    pub rho0: &'a DensityMatrix,
    pub grid: TimeGrid,
    pub seed: SeedPolicy,
    pub mode: RecordMode,
    pub options: FilterOptions,
    pub replay: Option<&'a OutputRecord>,
    pub pure_propagator: bool,
}

impl<'a> TrajectorySetup<'a> {
    pub fn new(model: &'a FilterModel, rho0: &'a DensityMatrix, grid: TimeGrid, seed: SeedPolicy, mode: RecordMode) -> Self {
        Self { model, rho0, grid, seed, mode, options: FilterOptions::default(), replay: None, pure_propagator: false }
    }

    pub fn with_options(mut self, options: FilterOptions) -> Self {
        self.options = options;
        self
    }

    pub fn with_replay(mut self, record: &'a OutputRecord) -> Self {
        self.replay = Some(record);
        self.mode = RecordMode::ReplayGiven;
        self
    }

    pub fn with_pure_propagator(mut self) -> Self {
        self.pure_propagator = true;
        self
    }

    /// Runs trajectory `k`. The observer sees the initial state with no
    /// record, then the state after each step together with that step's
    /// increments.
    pub fn run<F>(&self, k: u64, mut observer: F) -> Result<FilterState>
    where
        F: FnMut(&FilterState, Option<&[f64]>) -> Result<()>,
    {
        if self.rho0.dim() != self.model.dim() {
            return Err(Error::DimensionMismatch { expected: self.model.dim(), found: self.rho0.dim() });
        }
        let width = self.model.record_width();
        let dt = self.grid.dt();
        let mut state = FilterState::new(self.rho0, self.grid.t0, self.options.stepping);
        if self.pure_propagator {
            state = state.with_pure_propagator();
        }
        let mut noise_stream = match self.mode {
            RecordMode::ReplayGiven => {
                let rec = self.replay.ok_or_else(|| Error::InvalidArgument("replay mode needs a record".into()))?;
                if rec.width != width || rec.n_steps() < self.grid.n_steps {
                    return Err(Error::InvalidArgument(format!(
                        "replay record has {} steps of width {}, need {} of width {width}",
                        rec.n_steps(),
                        rec.width,
                        self.grid.n_steps
                    )));
                }
                None
            }
            _ => Some(WienerStream::new(&self.model.noise_weights(), dt, &self.seed, k)?),
        };
        let mut noise = vec![0.0; width];
        let mut record = vec![0.0; width];
        observer(&state, None)?;
        for step in 0..self.grid.n_steps {
            match (self.mode, noise_stream.as_mut()) {
                (RecordMode::ReplayGiven, _) => record.copy_from_slice(self.replay.expect("checked above").step(step)),
                (RecordMode::ReferenceMeasure, Some(s)) => {
                    s.fill(&mut noise);
                    reference_output_into(self.model, &noise, &mut record);
                }
                (_, Some(s)) => {
                    s.fill(&mut noise);
                    simulate_output_into(&state, self.model, &noise, dt, &mut record)?;
                }
                (_, None) => unreachable!("noise stream exists outside replay"),
            }
            state.advance(self.model, &record, dt, &self.options)?;
            observer(&state, Some(&record))?;
        }
        Ok(state)
    }

    /// Runs trajectory `k` and keeps its observation record.
    pub fn run_recorded(&self, k: u64) -> Result<(FilterState, OutputRecord)> {
        let mut rec = OutputRecord::new(self.mode, self.model.record_width());
        let state = self.run(k, |_, r| {
            if let Some(r) = r {
                rec.push(r);
            }
            Ok(())
        })?;
        Ok((state, rec))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belavkin::channel::MeasurementChannel;
    use crate::belavkin::filter::Stepping;
    use crate::operator::{Operator, C64, ONE, ZERO};

    #[test]
    fn zero_coupling_output_is_pure_noise() {
        let model = FilterModel::new(Operator::zeros(2), vec![MeasurementChannel::homodyne(Operator::zeros(2), 1.0)]).unwrap();
        let rho0 = DensityMatrix::pure(&[ONE, ZERO]).unwrap();
        let s = FilterState::new(&rho0, 0.0, Stepping::Normalized);
        assert_eq!(simulate_output(&s, &model, &[0.123], 1e-3).unwrap(), vec![0.123]);
    }

    #[test]
    fn eigenstate_drift_is_twice_the_eigenvalue() {
        let ell = 0.7;
        let model = FilterModel::new(Operator::zeros(2), vec![MeasurementChannel::homodyne(Operator::sigma_z().scale(C64::from(ell)), 1.0)]).unwrap();
        let rho0 = DensityMatrix::pure(&[ONE, ZERO]).unwrap();
        let s = FilterState::new(&rho0, 0.0, Stepping::Normalized);
        let dy = simulate_output(&s, &model, &[0.0], 1e-3).unwrap();
        assert!((dy[0] - 2.0 * ell * 1e-3).abs() < 1e-15);
    }

    #[test]
    fn reference_record_is_the_raw_noise() {
        let model = FilterModel::new(Operator::zeros(2), vec![MeasurementChannel::homodyne(Operator::sigma_z(), 0.5)]).unwrap();
        let rho0 = DensityMatrix::pure(&[ONE, ONE]).unwrap();
        let grid = TimeGrid::new(0.0, 0.1, 100).unwrap();
        let seed = SeedPolicy::new(4);
        let setup = TrajectorySetup::new(&model, &rho0, grid, seed, RecordMode::ReferenceMeasure);
        let (_, rec) = setup.run_recorded(3).unwrap();
        let path = crate::stochastic::sample_wiener_path(&grid, &[0.5], &seed, 3).unwrap();
        assert_eq!(rec.data, path.column(0).collect::<Vec<_>>());
    }

    #[test]
    fn replay_reproduces_a_physical_run() {
        let chs = vec![MeasurementChannel::homodyne(Operator::sigma_minus(), 1.0), MeasurementChannel::heterodyne(Operator::sigma_z(), 0.4)];
        let model = FilterModel::new(Operator::sigma_x().scale(C64::from(0.5)), chs).unwrap();
        let rho0 = DensityMatrix::pure(&[ONE, ZERO]).unwrap();
        let grid = TimeGrid::new(0.0, 0.5, 500).unwrap();
        let setup = TrajectorySetup::new(&model, &rho0, grid, SeedPolicy::new(8), RecordMode::SimulatePhysical);
        let (a, rec) = setup.run_recorded(0).unwrap();
        let replay = setup.clone().with_replay(&rec);
        let (b, _) = replay.run_recorded(99).unwrap();
        assert_eq!(a, b);
    }
}
