// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::channel::{coarse_grain, CoarseGrained, DetectionKind, MeasurementChannel, ObservedChannel};
use crate::error::{Error, Result};
use crate::operator::{
    expm, lindblad_generator, min_eigenvalue_hermitian, repair_hermitian, CMatrix, DensityMatrix, LindbladGenerator, Operator, C64, I,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepScheme {
    /// `ς ↦ M ς M† + dt Σ R ς R†` with `M = exp(−K dt) + Σ L̄ dY`. Same drift
    /// and diffusion as the plain Euler step to first order; it never leaves
    /// the positive cone, keeps pure states pure under complete observation and
    /// is exact for closed systems.
    #[default]
    KrausEuler,
    /// Plain Euler–Maruyama on the linear equation.
    Euler,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stepping {
    /// Renormalize every step and accumulate the log-likelihood.
    #[default]
    Normalized,
    /// Step the unnormalized density directly.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterOptions {
    pub scheme: StepScheme,
    pub stepping: Stepping,
    /// Positivity is checked every this many steps; 0 disables the check.
    pub psd_check_every: usize,
    pub psd_tol: f64,
}

impl Default for FilterOptions {
    fn default() -> Self {
        Self { scheme: StepScheme::KrausEuler, stepping: Stepping::Normalized, psd_check_every: 1, psd_tol: 1e-6 }
    }
}

/// A finite-dimensional system under continuous observation, with the
/// coarse-grained channels precomputed.
#[derive(Debug, Clone)]
pub struct FilterModel {
    h: Operator,
    channels: Vec<MeasurementChannel>,
    grained: CoarseGrained,
    k_eff: CMatrix,
    obs: Vec<CMatrix>,
    obs_adj: Vec<CMatrix>,
    residual: Vec<CMatrix>,
    residual_adj: Vec<CMatrix>,
    drift_cache: OnceLock<(f64, CMatrix)>,
}

impl FilterModel {
    pub fn new(h: Operator, channels: Vec<MeasurementChannel>) -> Result<Self> {
        if !h.is_hermitian(1e-12 * h.norm().max(1.0)) {
            return Err(Error::InvalidArgument("Hamiltonian is not Hermitian".into()));
        }
        super::channel::validate_channels(h.dim(), &channels)?;
        let grained = coarse_grain(&channels)?;
        let n = h.dim();
        let mut k_eff = h.matrix() * I;
        for ch in &channels {
            let l = ch.op.matrix();
            k_eff += l.adjoint() * l * C64::from(0.5 * ch.weight);
        }
        let obs: Vec<CMatrix> = grained.observed.iter().map(|o| o.op.matrix().clone()).collect();
        let residual: Vec<CMatrix> = grained.residual.iter().map(|r| r.matrix().clone()).collect();
        debug_assert!(obs.iter().all(|m| m.nrows() == n));
        Ok(Self {
            obs_adj: obs.iter().map(|m| m.adjoint()).collect(),
            residual_adj: residual.iter().map(|m| m.adjoint()).collect(),
            h,
            channels,
            grained,
            k_eff,
            obs,
            residual,
            drift_cache: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.h
    }

    pub fn channels(&self) -> &[MeasurementChannel] {
        &self.channels
    }

    pub fn observed(&self) -> &[ObservedChannel] {
        &self.grained.observed
    }

    pub fn residual(&self) -> &[Operator] {
        &self.grained.residual
    }

    pub fn is_complete(&self) -> bool {
        self.grained.complete
    }

    /// `K = iH + ½ Σ λ L†L` over all channels.
    pub fn k_eff(&self) -> &CMatrix {
        &self.k_eff
    }

    /// Reals per step of an observation record: one `dY` per homodyne signal,
    /// `(Re dZ, Im dZ)` per heterodyne signal.
    pub fn record_width(&self) -> usize {
        self.observed().iter().map(|o| kind_width(o.kind)).sum()
    }

    /// Variances per unit time of the reference noise columns: `Λ` for each
    /// homodyne signal and `Λ, Λ` for the two quadratures `dw±` of each
    /// heterodyne signal.
    pub fn noise_weights(&self) -> Vec<f64> {
        let mut w = Vec::new();
        for o in self.observed() {
            for _ in 0..kind_width(o.kind) {
                w.push(o.weight);
            }
        }
        w
    }

    pub fn all_kind(&self, kind: DetectionKind) -> bool {
        self.observed().iter().all(|o| o.kind == kind)
    }

    /// The unconditional generator built from every channel.
    pub fn lindblad(&self) -> Result<LindbladGenerator> {
        let chs: Vec<(Operator, f64)> = self.channels.iter().map(|c| (c.op.clone(), c.weight)).collect();
        lindblad_generator(&self.h, &chs)
    }

    pub(crate) fn obs_ops(&self) -> &[CMatrix] {
        &self.obs
    }

    /// `exp(−K dt)`, cached for the first step size seen.
    fn drift_propagator(&self, dt: f64) -> CMatrix {
        let (cached_dt, m) = self.drift_cache.get_or_init(|| (dt, expm(&(-&self.k_eff * C64::from(dt)))));
        if *cached_dt == dt {
            m.clone()
        } else {
            expm(&(-&self.k_eff * C64::from(dt)))
        }
    }

    /// `M = exp(−K dt) + Σ L̄ dY + Σ L̄ dZ*`.
    pub(crate) fn kraus(&self, record: &[f64], dt: f64) -> CMatrix {
        let mut m = self.drift_propagator(dt);
        let mut pos = 0;
        for (o, l) in self.observed().iter().zip(&self.obs) {
            let z = match o.kind {
                DetectionKind::Homodyne => C64::from(record[pos]),
                DetectionKind::Heterodyne => C64::new(record[pos], -record[pos + 1]),
            };
            pos += kind_width(o.kind);
            for (mi, li) in m.as_mut_slice().iter_mut().zip(l.as_slice()) {
                *mi += li * z;
            }
        }
        m
    }

    fn dissipate_residual(&self, rho: &CMatrix, out: &mut CMatrix, scale: f64) {
        for (r, rd) in self.residual.iter().zip(&self.residual_adj) {
            *out += r * rho * rd * C64::from(scale);
        }
    }

    fn euler_increment(&self, rho: &CMatrix, record: &[f64], dt: f64) -> CMatrix {
        let kr = &self.k_eff * rho;
        let mut out = rho - (&kr + kr.adjoint()) * C64::from(dt);
        self.dissipate_residual(rho, &mut out, dt);
        let mut pos = 0;
        for ((o, l), ld) in self.observed().iter().zip(&self.obs).zip(&self.obs_adj) {
            let lr = l * rho;
            out += &lr * ld * C64::from(o.weight * dt);
            match o.kind {
                DetectionKind::Homodyne => out += (&lr + lr.adjoint()) * C64::from(record[pos]),
                DetectionKind::Heterodyne => {
                    let dz = C64::new(record[pos], record[pos + 1]);
                    out += &lr * dz.conj() + rho * ld * dz;
                }
            }
            pos += kind_width(o.kind);
        }
        out
    }

    fn check_record(&self, record: &[f64]) -> Result<()> {
        if record.len() != self.record_width() {
            return Err(Error::IncrementCount { expected: self.record_width(), found: record.len() });
        }
        Ok(())
    }
}

pub(crate) fn kind_width(kind: DetectionKind) -> usize {
    match kind {
        DetectionKind::Homodyne => 1,
        DetectionKind::Heterodyne => 2,
    }
}

/// The posterior along one trajectory.
///
/// The unnormalized density is `ς = exp(log_scale)·ρ` where `ρ` is the stepped
/// matrix. Normalized stepping keeps `tr ρ = 1`; raw stepping keeps
/// `log_scale = 0` and `ρ = ς`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    rho: CMatrix,
    log_scale: f64,
    t: f64,
    step: usize,
    stepping: Stepping,
    propagator: Option<CMatrix>,
    log_trace0: f64,
}

impl FilterState {
    pub fn new(rho0: &DensityMatrix, t0: f64, stepping: Stepping) -> Self {
        let tr = rho0.trace();
        let (rho, log_scale) = match stepping {
            Stepping::Normalized => (rho0.matrix() / C64::from(tr), tr.ln()),
            Stepping::Raw => (rho0.matrix().clone(), 0.0),
        };
        Self { rho, log_scale, t: t0, step: 0, stepping, propagator: None, log_trace0: tr.ln() }
    }

    /// Also carry the linear propagator `F̂` with `ς = F̂ ρ0 F̂†`; stepping
    /// then requires complete observation.
    pub fn with_pure_propagator(mut self) -> Self {
        let n = self.rho.nrows();
        self.propagator = Some(CMatrix::identity(n, n));
        self
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn stepping(&self) -> Stepping {
        self.stepping
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    /// The unnormalized posterior density `ς`.
    pub fn varsigma(&self) -> CMatrix {
        &self.rho * C64::from(self.log_scale.exp())
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    /// `ln ρ̂ = ln tr ς`.
    pub fn log_likelihood(&self) -> f64 {
        self.log_scale + self.trace().ln()
    }

    pub fn likelihood(&self) -> f64 {
        self.log_likelihood().exp()
    }

    pub fn normalized_matrix(&self) -> CMatrix {
        &self.rho / C64::from(self.trace())
    }

    pub fn purity(&self) -> f64 {
        let tr = self.trace();
        self.rho.iter().map(|z| z.norm_sqr()).sum::<f64>() / (tr * tr)
    }

    /// `tr(X ρ)` in the normalized posterior.
    pub fn expectation(&self, x: &Operator) -> C64 {
        crate::operator::trace_product(x.matrix(), &self.rho) / C64::from(self.trace())
    }

    /// The unnormalized propagator `F̂`, if carried.
    pub fn pure_propagator(&self) -> Option<Operator> {
        let f = self.propagator.as_ref()?;
        let scale = ((self.log_scale - self.log_trace0) * 0.5).exp();
        Operator::new(f * C64::from(scale)).ok()
    }

    /// Advances by one step on the given observation record.
    pub fn advance(&mut self, model: &FilterModel, record: &[f64], dt: f64, opts: &FilterOptions) -> Result<()> {
        model.check_record(record)?;
        if self.rho.nrows() != model.dim() {
            return Err(Error::DimensionMismatch { expected: model.dim(), found: self.rho.nrows() });
        }
        if self.propagator.is_some() && !model.is_complete() {
            return Err(Error::IncompleteObservation("the pure propagator needs every channel observed on its own".into()));
        }
        let step = self.step + 1;
        let kraus = (opts.scheme == StepScheme::KrausEuler || self.propagator.is_some()).then(|| model.kraus(record, dt));
        let mut next = match (opts.scheme, &kraus) {
            (StepScheme::KrausEuler, Some(m)) => {
                let mut out = m * &self.rho * m.adjoint();
                model.dissipate_residual(&self.rho, &mut out, dt);
                out
            }
            _ => model.euler_increment(&self.rho, record, dt),
        };
        repair_hermitian(&mut next);
        if next.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFiniteStep { step });
        }
        let tr = next.trace().re;
        if !(tr > 0.0 && tr.is_finite()) {
            return Err(Error::TraceUnderflow { step, trace: tr });
        }
        let mut f_next = match (&self.propagator, &kraus) {
            (Some(f), Some(m)) => Some(m * f),
            _ => None,
        };
        if self.stepping == Stepping::Normalized {
            next /= C64::from(tr);
            self.log_scale += tr.ln();
            if let Some(f) = f_next.as_mut() {
                *f /= C64::from(tr.sqrt());
            }
        }
        if opts.psd_check_every > 0 && step % opts.psd_check_every == 0 {
            let min_eig = min_eigenvalue_hermitian(&next) / next.trace().re;
            if min_eig < -opts.psd_tol {
                return Err(Error::NotPositive { step, min_eig });
            }
        }
        self.rho = next;
        self.propagator = f_next;
        self.step = step;
        self.t += dt;
        Ok(())
    }
}

/// One step on real (homodyne) increments.
pub fn step_unnormalized(state: &FilterState, model: &FilterModel, dy: &[f64], dt: f64, opts: &FilterOptions) -> Result<FilterState> {
    if !model.all_kind(DetectionKind::Homodyne) {
        return Err(Error::KindMismatch("real increments given for a model with heterodyne signals".into()));
    }
    let mut next = state.clone();
    next.advance(model, dy, dt, opts)?;
    Ok(next)
}

/// One step on complex (heterodyne) increments.
pub fn step_heterodyne(state: &FilterState, model: &FilterModel, dz: &[C64], dt: f64, opts: &FilterOptions) -> Result<FilterState> {
    if !model.all_kind(DetectionKind::Heterodyne) {
        return Err(Error::KindMismatch("complex increments given for a model with homodyne signals".into()));
    }
    let record: Vec<f64> = dz.iter().flat_map(|z| [z.re, z.im]).collect();
    let mut next = state.clone();
    next.advance(model, &record, dt, opts)?;
    Ok(next)
}

/// One Euler step of `dF̂ = −K F̂ dt + Σ L F̂ dY` (or `L F̂ dZ*`).
pub fn step_pure_propagator(f: &Operator, model: &FilterModel, record: &[f64], dt: f64) -> Result<Operator> {
    if !model.is_complete() {
        return Err(Error::IncompleteObservation("every channel must be observed on its own".into()));
    }
    model.check_record(record)?;
    if f.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: f.dim() });
    }
    Operator::new(model.kraus(record, dt) * f.matrix())
}

/// `(ς / tr ς, ρ̂)`.
pub fn normalize(state: &FilterState) -> Result<(DensityMatrix, f64)> {
    let tr = state.trace();
    if !(tr > 0.0 && tr.is_finite()) {
        return Err(Error::TraceUnderflow { step: state.step, trace: tr });
    }
    Ok((DensityMatrix::from_matrix_unchecked(state.normalized_matrix()), state.likelihood()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{ONE, ZERO};
    use crate::stochastic::{SeedPolicy, WienerStream};
    use approx::assert_relative_eq;

    fn excited() -> DensityMatrix {
        DensityMatrix::pure(&[ONE, ZERO]).unwrap()
    }

    #[test]
    fn closed_system_follows_von_neumann() {
        let h = Operator::sigma_x().scale(C64::from(0.5));
        let model = FilterModel::new(h.clone(), vec![]).unwrap();
        let mut s = FilterState::new(&excited(), 0.0, Stepping::Normalized);
        let dt = 1e-4;
        for _ in 0..10_000 {
            s.advance(&model, &[], dt, &FilterOptions::default()).unwrap();
        }
        // Population of the excited state is cos²(t/2) at t = 1.
        let p = s.normalized_matrix()[(0, 0)].re;
        assert_relative_eq!(p, (0.5f64).cos().powi(2), epsilon = 1e-4);
        assert!(s.log_likelihood().abs() < 1e-12);
    }

    #[test]
    fn eigenstate_likelihood_is_doleans_exponential() {
        // Hermitian L with ρ0 an eigenstate: ς_t = ρ0 exp(2ℓY − 2ℓ²t).
        let ell = 0.4;
        let l = Operator::sigma_z().scale(C64::from(ell));
        let model = FilterModel::new(Operator::zeros(2), vec![MeasurementChannel::homodyne(l, 1.0)]).unwrap();
        let dt = 1e-4;
        for scheme in [StepScheme::KrausEuler, StepScheme::Euler] {
            let opts = FilterOptions { scheme, ..Default::default() };
            let mut noise = WienerStream::new(&[1.0], dt, &SeedPolicy::new(17), 0).unwrap();
            let mut s = FilterState::new(&excited(), 0.0, Stepping::Normalized);
            let mut dy = [0.0];
            let mut y = 0.0;
            for _ in 0..10_000 {
                noise.fill(&mut dy);
                y += dy[0];
                s.advance(&model, &dy, dt, &opts).unwrap();
            }
            let exact = 2.0 * ell * y - 2.0 * ell * ell;
            assert!((s.log_likelihood() - exact).abs() < 1e-2, "{scheme:?}: {} vs {exact}", s.log_likelihood());
            assert!((s.normalized_matrix()[(0, 0)].re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn raw_and_normalized_stepping_agree() {
        let chs = vec![
            MeasurementChannel::homodyne(Operator::sigma_minus(), 0.8),
            MeasurementChannel::homodyne(Operator::sigma_z(), 0.3).unobserved(),
        ];
        let model = FilterModel::new(Operator::sigma_y().scale(C64::from(0.3)), chs).unwrap();
        let rho0 = DensityMatrix::pure(&[C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        let mut a = FilterState::new(&rho0, 0.0, Stepping::Normalized);
        let mut b = FilterState::new(&rho0, 0.0, Stepping::Raw);
        let opts = FilterOptions::default();
        for k in 0..2000 {
            let dy = 0.03 * ((k as f64) * 1.3).cos();
            a.advance(&model, &[dy], 1e-3, &opts).unwrap();
            b.advance(&model, &[dy], 1e-3, &opts).unwrap();
        }
        assert!((a.varsigma() - b.varsigma()).norm() < 1e-12 * b.varsigma().norm());
        assert_relative_eq!(a.log_likelihood(), b.log_likelihood(), epsilon = 1e-12);
    }

    #[test]
    fn normalize_scales_out_the_trace() {
        let rho = DensityMatrix::new(Operator::identity(2).scale(C64::from(1.5))).unwrap();
        let s = FilterState::new(&rho, 0.0, Stepping::Raw);
        let (n, lik) = normalize(&s).unwrap();
        assert_relative_eq!(lik, 3.0, epsilon = 1e-15);
        assert_relative_eq!(n.trace(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn kind_and_count_errors() {
        let model = FilterModel::new(Operator::zeros(2), vec![MeasurementChannel::heterodyne(Operator::sigma_minus(), 1.0)]).unwrap();
        let s = FilterState::new(&excited(), 0.0, Stepping::Normalized);
        let opts = FilterOptions::default();
        assert!(matches!(step_unnormalized(&s, &model, &[0.1], 1e-3, &opts), Err(Error::KindMismatch(_))));
        let err = step_heterodyne(&s, &model, &[C64::new(0.1, 0.0), ZERO], 1e-3, &opts).unwrap_err();
        assert_eq!(err, Error::IncrementCount { expected: 2, found: 4 });
    }

    #[test]
    fn positivity_guard_aborts_plain_euler() {
        let model = FilterModel::new(Operator::zeros(2), vec![MeasurementChannel::homodyne(Operator::sigma_minus(), 1.0)]).unwrap();
        let rho0 = DensityMatrix::pure(&[ONE, ONE]).unwrap();
        let opts = FilterOptions { scheme: StepScheme::Euler, ..Default::default() };
        let mut s = FilterState::new(&rho0, 0.0, Stepping::Normalized);
        let err = s.advance(&model, &[3.0], 1e-3, &opts).unwrap_err();
        assert!(matches!(err, Error::NotPositive { step: 1, .. }));
        let mut k = FilterState::new(&rho0, 0.0, Stepping::Normalized);
        k.advance(&model, &[3.0], 1e-3, &FilterOptions::default()).unwrap();
    }

    #[test]
    fn pure_propagator_needs_complete_observation() {
        let chs = vec![MeasurementChannel::homodyne(Operator::sigma_z(), 1.0).unobserved()];
        let model = FilterModel::new(Operator::zeros(2), chs).unwrap();
        let err = step_pure_propagator(&Operator::identity(2), &model, &[], 1e-3).unwrap_err();
        assert!(matches!(err, Error::IncompleteObservation(_)));
    }

    #[test]
    fn zero_coupling_propagator_is_unitary_euler() {
        let h = Operator::sigma_z().scale(C64::from(0.5));
        let model = FilterModel::new(h, vec![MeasurementChannel::homodyne(Operator::zeros(2), 1.0)]).unwrap();
        let mut f = Operator::identity(2);
        let dt = 1e-5;
        for _ in 0..100_000 {
            f = step_pure_propagator(&f, &model, &[0.0], dt).unwrap();
        }
        let expected = C64::new(0.0, -0.5).exp();
        assert!((f.matrix()[(0, 0)] - expected).norm() < 1e-4);
        assert!((f.matrix()[(1, 1)] - expected.conj()).norm() < 1e-4);
    }
}
