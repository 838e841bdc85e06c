// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::path::PathBuf;

use qfilter_core::belavkin::{RecordMode, StepScheme};
use qfilter_core::models::{catalog, ModelSpec, ModelSystem};
use qfilter_core::TimeGrid;
use serde::{Deserialize, Serialize};

use crate::observables::Observable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Trajectories of the finite-dimensional filter.
    Ensemble,
    /// Riccati flow plus mean-filter trajectories of a phase-space model.
    Kalman,
    /// Riccati flow of a scalar-reducible model against its closed form.
    RiccatiScalar,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Reference,
    #[default]
    Physical,
    Replay,
}

impl From<Mode> for RecordMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Reference => RecordMode::ReferenceMeasure,
            Mode::Physical => RecordMode::SimulatePhysical,
            Mode::Replay => RecordMode::ReplayGiven,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// Ensemble observables within `se_limit` standard errors of the
    /// master-equation solution.
    Lindblad,
    /// Ensemble mean of the likelihood within `se_limit` of 1 (reference mode).
    Martingale,
    /// Ensemble (weighted) posterior means within `se_limit` of the prior mean.
    PriorMean,
    /// Riccati flow within `rel_tol` of the scalar closed form.
    ClosedForm,
}

/// A catalog name or an inline model, `{"finite": …}` or `{"phase_space": …}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Named(String),
    Inline(serde_json::Value),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub dir: PathBuf,
    pub observables: Vec<String>,
    /// Trajectories `0..dump_trajectories` are written out in full.
    pub dump_trajectories: u64,
    /// Number of equally spaced times at which ensemble statistics are taken.
    pub checkpoints: usize,
}

impl Default for Outputs {
    fn default() -> Self {
        Self { dir: PathBuf::from("qfilter-out"), observables: Vec::new(), dump_trajectories: 0, checkpoints: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub se_limit: f64,
    pub rel_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { se_limit: 4.0, rel_tol: 1e-6 }
    }
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: ModelRef,
    /// Defaults to the model's own grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<TimeGrid>,
    #[serde(default = "one")]
    pub n_traj: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub mode: Mode,
    /// Record CSV as written next to a dumped trajectory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_file: Option<PathBuf>,
    #[serde(default)]
    pub scheme: StepScheme,
    /// 0 picks the `QFILTER_WORKERS` variable, then the machine's parallelism.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub checks: Vec<Check>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// A configuration problem, named by the path of the offending field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn model_spec(&self) -> qfilter_core::Result<ModelSpec> {
        match &self.model {
            ModelRef::Named(name) => catalog(name),
            ModelRef::Inline(value) => {
                let grid = self.grid.unwrap_or(TimeGrid { t0: 0.0, t1: 1.0, n_steps: 1000 });
                ModelSpec::from_system_value("inline", value.clone(), grid)
            }
        }
    }

    pub fn resolved_grid(&self, spec: &ModelSpec) -> TimeGrid {
        self.grid.unwrap_or(spec.grid)
    }
}

/// Every problem that would stop the configuration from running; empty iff
/// it is runnable.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if let Some(g) = &cfg.grid {
        if g.n_steps == 0 {
            out.push(Diagnostic::new("grid.n_steps", "must be at least 1"));
        }
        if !(g.t0.is_finite() && g.t1.is_finite() && g.t1 > g.t0) {
            out.push(Diagnostic::new("grid.t1", format!("must be finite and greater than grid.t0, got [{}, {}]", g.t0, g.t1)));
        }
    }
    if cfg.n_traj == 0 {
        out.push(Diagnostic::new("n_traj", "must be at least 1"));
    }
    match (cfg.mode, &cfg.replay_file) {
        (Mode::Replay, None) => out.push(Diagnostic::new("replay_file", "replay mode needs an increments file")),
        (Mode::Replay, Some(p)) if !p.is_file() => {
            out.push(Diagnostic::new("replay_file", format!("{} is not a readable file", p.display())))
        }
        (Mode::Replay, Some(_)) if cfg.n_traj != 1 => {
            out.push(Diagnostic::new("n_traj", "replay mode filters one given record, so n_traj must be 1"))
        }
        (Mode::Reference | Mode::Physical, Some(_)) => {
            out.push(Diagnostic::new("replay_file", "only used in replay mode"))
        }
        _ => {}
    }
    if cfg.outputs.checkpoints == 0 {
        out.push(Diagnostic::new("outputs.checkpoints", "must be at least 1"));
    }
    if cfg.outputs.dump_trajectories > cfg.n_traj {
        out.push(Diagnostic::new("outputs.dump_trajectories", "cannot exceed n_traj"));
    }
    if !(cfg.tolerances.se_limit > 0.0) {
        out.push(Diagnostic::new("tolerances.se_limit", "must be positive"));
    }
    if !(cfg.tolerances.rel_tol > 0.0) {
        out.push(Diagnostic::new("tolerances.rel_tol", "must be positive"));
    }

    let spec = match cfg.model_spec() {
        Ok(spec) => spec,
        Err(e) => {
            out.push(Diagnostic::new("model", e.to_string()));
            return out;
        }
    };
    let grid = cfg.resolved_grid(&spec);
    if grid.n_steps > 0 && cfg.outputs.checkpoints > grid.n_steps {
        out.push(Diagnostic::new("outputs.checkpoints", format!("cannot exceed the {} grid steps", grid.n_steps)));
    }
    let finite = matches!(spec.system, ModelSystem::Finite(_));
    match cfg.experiment {
        ExperimentKind::Ensemble if !finite => {
            out.push(Diagnostic::new("experiment", "ensemble runs need a finite-dimensional model"))
        }
        ExperimentKind::Kalman | ExperimentKind::RiccatiScalar if finite => {
            out.push(Diagnostic::new("experiment", "this experiment needs a phase-space model"))
        }
        _ => {}
    }
    if let ModelSystem::Finite(sys) = &spec.system {
        for (i, name) in cfg.outputs.observables.iter().enumerate() {
            if let Err(e) = Observable::parse(name, sys.dim()) {
                out.push(Diagnostic::new(format!("outputs.observables[{i}]"), e));
            }
        }
    } else if !cfg.outputs.observables.is_empty() {
        out.push(Diagnostic::new("outputs.observables", "observables apply to finite-dimensional models"));
    }

    for (i, check) in cfg.checks.iter().enumerate() {
        let field = format!("checks[{i}]");
        let fits = match check {
            Check::Lindblad => cfg.experiment == ExperimentKind::Ensemble && cfg.mode != Mode::Replay,
            Check::Martingale => cfg.experiment == ExperimentKind::Ensemble && cfg.mode == Mode::Reference,
            Check::PriorMean => cfg.experiment == ExperimentKind::Kalman && cfg.mode != Mode::Replay,
            Check::ClosedForm => cfg.experiment == ExperimentKind::RiccatiScalar,
        };
        if !fits {
            out.push(Diagnostic::new(field, format!("{check:?} does not apply to this experiment and mode")));
        } else if *check == Check::Lindblad && cfg.outputs.observables.is_empty() {
            out.push(Diagnostic::new("outputs.observables", "the lindblad check needs at least one observable"));
        }
    }
    out
}
