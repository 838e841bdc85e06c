// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

use qfilter_core::TimeGrid;

use crate::config::{Check, ExperimentConfig, ExperimentKind, ModelRef, Mode, Outputs, Tolerances};

pub const PRESETS: &[&str] = &["riccati-scalar", "unraveling-spin", "kalman-oscillator", "trajectory-spin"];

fn base(experiment: ExperimentKind, model: &str) -> ExperimentConfig {
    ExperimentConfig {
        experiment,
        model: ModelRef::Named(model.to_string()),
        grid: None,
        n_traj: 1,
        master_seed: 20_260_101,
        mode: Mode::Physical,
        replay_file: None,
        scheme: Default::default(),
        workers: 0,
        outputs: Outputs::default(),
        checks: Vec::new(),
        tolerances: Tolerances::default(),
    }
}

fn spin_observables() -> Vec<String> {
    ["sigma_x", "sigma_y", "sigma_z"].map(String::from).to_vec()
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let cfg = match name {
        "riccati-scalar" => ExperimentConfig {
            grid: Some(TimeGrid { t0: 0.0, t1: 10.0, n_steps: 10_000 }),
            checks: vec![Check::ClosedForm],
            ..base(ExperimentKind::RiccatiScalar, "oscillator-unit")
        },
        "unraveling-spin" => ExperimentConfig {
            n_traj: 10_000,
            mode: Mode::Reference,
            outputs: Outputs { observables: spin_observables(), ..Default::default() },
            checks: vec![Check::Lindblad, Check::Martingale],
            ..base(ExperimentKind::Ensemble, "spin-hemispheres")
        },
        "kalman-oscillator" => ExperimentConfig {
            n_traj: 2000,
            outputs: Outputs { dump_trajectories: 1, ..Default::default() },
            checks: vec![Check::PriorMean],
            ..base(ExperimentKind::Kalman, "oscillator-unstable")
        },
        "trajectory-spin" => ExperimentConfig {
            mode: Mode::Reference,
            outputs: Outputs { observables: spin_observables(), dump_trajectories: 1, ..Default::default() },
            ..base(ExperimentKind::Ensemble, "spin-hemispheres")
        },
        _ => return None,
    };
    Some(cfg)
}
