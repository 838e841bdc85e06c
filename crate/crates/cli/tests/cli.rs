// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::Path;
use std::process::Command;

use proptest::prelude::*;
use qfilter_cli::config::{Check, ModelRef};
use qfilter_cli::{preset, run, validate, ExperimentConfig, Mode, PRESETS};
use qfilter_core::TimeGrid;

fn qfilter() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qfilter"))
}

fn short_trajectory(dir: &Path) -> ExperimentConfig {
    let mut cfg = preset("trajectory-spin").unwrap();
    cfg.grid = Some(TimeGrid { t0: 0.0, t1: 0.2, n_steps: 200 });
    cfg.outputs.dir = dir.to_path_buf();
    cfg
}

fn fields(diags: &[qfilter_cli::Diagnostic]) -> Vec<&str> {
    diags.iter().map(|d| d.field.as_str()).collect()
}

#[test]
fn presets_validate_cleanly() {
    for name in PRESETS {
        assert_eq!(validate(&preset(name).unwrap()), vec![], "{name}");
    }
    assert!(preset("no-such-preset").is_none());
}

#[test]
fn zero_steps_is_reported_on_the_grid() {
    let mut cfg = preset("riccati-scalar").unwrap();
    cfg.grid = Some(TimeGrid { t0: 0.0, t1: 1.0, n_steps: 0 });
    assert!(fields(&validate(&cfg)).contains(&"grid.n_steps"));
}

#[test]
fn replay_without_a_file_is_reported() {
    let mut cfg = preset("trajectory-spin").unwrap();
    cfg.mode = Mode::Replay;
    assert_eq!(fields(&validate(&cfg)), vec!["replay_file"]);
}

#[test]
fn mismatched_checks_and_models_are_reported() {
    let mut cfg = preset("unraveling-spin").unwrap();
    cfg.mode = Mode::Physical;
    assert_eq!(fields(&validate(&cfg)), vec!["checks[1]"]);

    cfg.model = ModelRef::Named("oscillator-unit".into());
    let f = validate(&cfg);
    assert!(fields(&f).contains(&"experiment"), "{f:?}");

    cfg.model = ModelRef::Named("nonexistent".into());
    assert!(fields(&validate(&cfg)).contains(&"model"));
}

#[test]
fn unknown_fields_are_rejected() {
    let mut v: serde_json::Value = serde_json::from_str(&preset("riccati-scalar").unwrap().to_json()).unwrap();
    v["n_trajectories"] = 5.into();
    assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
}

#[test]
fn dump_config_round_trips() {
    for name in PRESETS {
        let out = qfilter().args(["--preset", name, "--dump-config"]).output().unwrap();
        assert!(out.status.success());
        let cfg = ExperimentConfig::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
        assert_eq!(cfg, preset(name).unwrap(), "{name}");
    }
}

#[test]
fn single_trajectory_output_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(&short_trajectory(a.path())).unwrap();
    let mut cfg = short_trajectory(b.path());
    cfg.workers = 3;
    run(&cfg).unwrap();
    for f in ["trajectory_0.csv", "record_0.csv", "ensemble.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn replaying_a_dumped_record_reproduces_the_trajectory() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    run(&short_trajectory(first.path())).unwrap();

    let mut cfg = short_trajectory(second.path());
    cfg.mode = Mode::Replay;
    cfg.master_seed += 1;
    cfg.replay_file = Some(first.path().join("record_0.csv"));
    run(&cfg).unwrap();
    for f in ["trajectory_0.csv", "record_0.csv"] {
        assert_eq!(fs::read_to_string(first.path().join(f)).unwrap(), fs::read_to_string(second.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn kalman_replay_reproduces_the_trajectory() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let mut cfg = preset("kalman-oscillator").unwrap();
    cfg.n_traj = 1;
    cfg.checks.clear();
    cfg.grid = Some(TimeGrid { t0: 0.0, t1: 0.5, n_steps: 500 });
    cfg.outputs.dir = first.path().to_path_buf();
    run(&cfg).unwrap();

    cfg.mode = Mode::Replay;
    cfg.replay_file = Some(first.path().join("record_0.csv"));
    cfg.outputs.dir = second.path().to_path_buf();
    run(&cfg).unwrap();
    let a = fs::read_to_string(first.path().join("trajectory_0.csv")).unwrap();
    let b = fs::read_to_string(second.path().join("trajectory_0.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn replay_rejects_a_record_of_the_wrong_width() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("bad.csv");
    fs::write(&rec, "t,dY\n0.001,0.1\n").unwrap();
    let mut cfg = short_trajectory(dir.path());
    cfg.mode = Mode::Replay;
    cfg.replay_file = Some(rec);
    assert!(run(&cfg).is_err());
}

#[test]
fn exit_status_tracks_the_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let status = qfilter().args(["--preset", "riccati-scalar", "--out-dir", out]).status().unwrap();
    assert_eq!(status.code(), Some(0));

    let mut cfg = preset("riccati-scalar").unwrap();
    cfg.tolerances.rel_tol = 1e-300;
    let path = dir.path().join("strict.json");
    fs::write(&path, cfg.to_json()).unwrap();
    let status = qfilter().args(["--config", path.to_str().unwrap(), "--out-dir", out]).status().unwrap();
    assert_eq!(status.code(), Some(1));

    let summary: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], false);
    assert_eq!(summary["checks"][0]["check"], "closed_form");

    let status = qfilter().args(["--preset", "nope"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
    cfg.n_traj = 0;
    fs::write(&path, cfg.to_json()).unwrap();
    let out = qfilter().args(["--config", path.to_str().unwrap(), "--validate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("n_traj"));
}

#[test]
fn inline_finite_model_runs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = qfilter_core::models::catalog("spin-hemispheres").unwrap();
    let mut cfg = short_trajectory(dir.path());
    cfg.model = ModelRef::Inline(spec.system_value());
    cfg.n_traj = 200;
    cfg.outputs.dump_trajectories = 0;
    cfg.checks = vec![Check::Lindblad, Check::Martingale];
    let summary = run(&cfg).unwrap();
    assert!(summary.passed, "{:?}", summary.checks);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn configs_round_trip_through_json(
        which in 0..PRESETS.len(),
        seed in any::<u64>(),
        n in 1u64..1_000_000,
        workers in 0usize..64,
        steps in 1usize..100_000,
    ) {
        let mut cfg = preset(PRESETS[which]).unwrap();
        cfg.master_seed = seed;
        cfg.n_traj = n;
        cfg.workers = workers;
        cfg.grid = Some(TimeGrid { t0: 0.0, t1: 2.5, n_steps: steps });
        prop_assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}
