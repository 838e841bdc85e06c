// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};

use qfilter_core::belavkin::{DetectionKind, FilterModel, FilterOptions, OutputRecord, RecordMode, TrajectorySetup};
use qfilter_core::gaussian::{
    prior_moments, scalar_reduction, stationary_covariance, ChannelKind, DriftData, KalmanSetup, PhaseSpaceModel,
    RiccatiSolution,
};
use qfilter_core::models::{FiniteSystem, ModelSystem};
use qfilter_core::operator::exact_lindblad_propagate;
use qfilter_core::stochastic::{run_ensemble, EnsembleStats};
use qfilter_core::{CMatrix, SeedPolicy, TimeGrid};
use serde::Serialize;
use serde_json::json;

use crate::config::{validate, Check, ExperimentConfig, ExperimentKind, Mode};
use crate::csv::{read_record, CsvWriter, Field};
use crate::error::CliError;
use crate::observables::Observable;

/// Largest dimension for which the master-equation oracle is computed unasked.
const ORACLE_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: Check,
    pub passed: bool,
    /// Worst SE-deviation or relative error found.
    pub value: f64,
    pub limit: f64,
}

/// One ensemble quantity at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantityStat {
    pub t: f64,
    pub quantity: String,
    pub mean: f64,
    pub std_err: f64,
    pub oracle: Option<f64>,
    pub deviation_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub experiment: ExperimentKind,
    pub model: String,
    pub grid: TimeGrid,
    pub n_traj: u64,
    pub master_seed: u64,
    pub mode: Mode,
    /// Statistics at the last checkpoint.
    pub final_stats: Vec<QuantityStat>,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
    pub files: Vec<String>,
    pub extra: serde_json::Value,
}

/// Validates, runs and writes every output into `outputs.dir`, ending with
/// `summary.json`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunSummary, CliError> {
    let diags = validate(cfg);
    if !diags.is_empty() {
        return Err(CliError::Invalid(diags));
    }
    let spec = cfg.model_spec()?;
    let grid = cfg.resolved_grid(&spec);
    fs::create_dir_all(&cfg.outputs.dir)?;
    let mut ctx = Context { cfg, grid, dir: cfg.outputs.dir.clone(), files: Vec::new() };
    let (final_stats, checks, extra) = match (&spec.system, cfg.experiment) {
        (ModelSystem::Finite(sys), ExperimentKind::Ensemble) => run_ensemble_experiment(&mut ctx, sys)?,
        (ModelSystem::PhaseSpace(m), ExperimentKind::Kalman) => run_kalman(&mut ctx, m)?,
        (ModelSystem::PhaseSpace(m), ExperimentKind::RiccatiScalar) => run_riccati_scalar(&mut ctx, m)?,
        _ => unreachable!("validate rejects mismatched experiments"),
    };
    let summary = RunSummary {
        experiment: cfg.experiment,
        model: spec.name.clone(),
        grid,
        n_traj: cfg.n_traj,
        master_seed: cfg.master_seed,
        mode: cfg.mode,
        final_stats,
        passed: checks.iter().all(|c| c.passed),
        checks,
        files: ctx.files.clone(),
        extra,
    };
    fs::write(ctx.dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(summary)
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    grid: TimeGrid,
    dir: PathBuf,
    files: Vec<String>,
}

impl Context<'_> {
    fn create(&mut self, name: &str, header: &[String]) -> Result<CsvWriter, CliError> {
        self.files.push(name.to_string());
        CsvWriter::create(&self.dir.join(name), header)
    }

    fn checkpoints(&self) -> Vec<usize> {
        let c = self.cfg.outputs.checkpoints;
        let n = self.grid.n_steps;
        (1..=c).map(|j| j * n / c).collect()
    }

    fn replay(&self, width: usize) -> Result<Option<OutputRecord>, CliError> {
        let Some(path) = self.cfg.replay_file.as_deref().filter(|_| self.cfg.mode == Mode::Replay) else {
            return Ok(None);
        };
        let (w, data) = read_record(path)?;
        if w != width {
            return Err(CliError::Record(format!("{} has {w} increments per step, the model needs {width}", path.display())));
        }
        let rec = OutputRecord { mode: RecordMode::ReplayGiven, width, data };
        if rec.n_steps() < self.grid.n_steps {
            return Err(CliError::Record(format!("{} has {} steps, the grid needs {}", path.display(), rec.n_steps(), self.grid.n_steps)));
        }
        Ok(Some(rec))
    }

    /// `ensemble.csv` plus the checkpoint statistics as records.
    fn write_ensemble(&mut self, names: &[String], stats: &EnsembleStats, oracle: &[Option<f64>]) -> Result<Vec<QuantityStat>, CliError> {
        let header = ["t", "quantity", "mean", "std_err", "oracle", "deviation_se"].map(String::from);
        let mut w = self.create("ensemble.csv", &header)?;
        let per = names.len();
        let mut all = Vec::with_capacity(stats.mean.len());
        for (j, step) in self.checkpoints().into_iter().enumerate() {
            let t = self.grid.time(step);
            for (q, name) in names.iter().enumerate() {
                let i = j * per + q;
                let o = oracle[i];
                let dev = o.map(|o| EnsembleStats { n: stats.n, mean: vec![stats.mean[i]], std_err: vec![stats.std_err[i]] }.deviations(&[o])[0]);
                let opt = |x: Option<f64>| x.map_or(Field::Empty, Field::Num);
                w.fields(&[Field::Num(t), Field::Text(name), Field::Num(stats.mean[i]), Field::Num(stats.std_err[i]), opt(o), opt(dev)])?;
                all.push(QuantityStat { t, quantity: name.clone(), mean: stats.mean[i], std_err: stats.std_err[i], oracle: o, deviation_se: dev });
            }
        }
        w.finish()?;
        Ok(all)
    }
}

fn worst_deviation<'a>(stats: impl Iterator<Item = &'a QuantityStat>) -> f64 {
    stats.filter_map(|s| s.deviation_se).fold(0.0, f64::max)
}

fn se_check(check: Check, value: f64, limit: f64) -> CheckResult {
    CheckResult { check, passed: value <= limit, value, limit }
}

fn final_only(all: Vec<QuantityStat>) -> Vec<QuantityStat> {
    let last = all.last().map(|s| s.t);
    all.into_iter().filter(|s| Some(s.t) == last).collect()
}

fn record_header(model: &FilterModel) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for o in model.observed() {
        match o.kind {
            DetectionKind::Homodyne => h.push(format!("dY_{}", o.label)),
            DetectionKind::Heterodyne => h.extend([format!("dZ_{}_re", o.label), format!("dZ_{}_im", o.label)]),
        }
    }
    h
}

type Outcome = (Vec<QuantityStat>, Vec<CheckResult>, serde_json::Value);

fn run_ensemble_experiment(ctx: &mut Context, sys: &FiniteSystem) -> Result<Outcome, CliError> {
    let cfg = ctx.cfg;
    let model = sys.filter_model()?;
    let observables: Vec<Observable> =
        cfg.outputs.observables.iter().map(|n| Observable::parse(n, sys.dim()).expect("validated")).collect();
    let reference = cfg.mode == Mode::Reference;
    let options = FilterOptions { scheme: cfg.scheme, ..Default::default() };
    let replay = ctx.replay(model.record_width())?;
    let mut setup = TrajectorySetup::new(&model, &sys.rho0, ctx.grid, SeedPolicy::new(cfg.master_seed), cfg.mode.into())
        .with_options(options);
    if let Some(rec) = &replay {
        setup = setup.with_replay(rec);
    }

    // Under the reference measure the unnormalized state is averaged, so the
    // likelihood itself is a quantity; otherwise the normalized posterior.
    let mut names: Vec<String> = Vec::new();
    if reference {
        names.push("likelihood".into());
    }
    names.extend(observables.iter().map(|o| o.name.clone()));
    let checkpoints = ctx.checkpoints();
    let stats = run_ensemble(cfg.n_traj, cfg.workers, |k| {
        let mut out = Vec::with_capacity(checkpoints.len() * names.len());
        let mut next = 0;
        setup.run(k, |s, _| {
            if next < checkpoints.len() && s.step_index() == checkpoints[next] {
                let m = if reference { s.varsigma() } else { s.normalized_matrix() };
                if reference {
                    out.push(s.likelihood());
                }
                out.extend(observables.iter().map(|o| o.value(&m)));
                next += 1;
            }
            Ok(())
        })?;
        Ok(out)
    })?;

    let want_oracle = cfg.checks.contains(&Check::Lindblad) || (sys.dim() <= ORACLE_DIM && cfg.mode != Mode::Replay);
    let mut oracle = Vec::with_capacity(stats.mean.len());
    let generator = if want_oracle { Some(model.lindblad()?) } else { None };
    for &step in &checkpoints {
        let exact = match &generator {
            Some(g) => Some(exact_lindblad_propagate(&sys.rho0, &g.schrodinger, ctx.grid.time(step) - ctx.grid.t0)?),
            None => None,
        };
        if reference {
            oracle.push(Some(1.0));
        }
        oracle.extend(observables.iter().map(|o| exact.as_ref().map(|r| o.value(r.matrix()))));
    }
    let all = ctx.write_ensemble(&names, &stats, &oracle)?;

    let se = cfg.tolerances.se_limit;
    let checks = cfg
        .checks
        .iter()
        .map(|c| match c {
            Check::Lindblad => se_check(*c, worst_deviation(all.iter().filter(|s| s.quantity != "likelihood")), se),
            Check::Martingale => se_check(*c, worst_deviation(all.iter().filter(|s| s.quantity == "likelihood")), se),
            _ => unreachable!("validated"),
        })
        .collect();

    for k in 0..cfg.outputs.dump_trajectories {
        dump_finite_trajectory(ctx, &setup, &observables, k)?;
    }
    let extra = json!({
        "dim": sys.dim(),
        "observed_signals": model.observed().len(),
        "complete_observation": model.is_complete(),
    });
    Ok((final_only(all), checks, extra))
}

/// `trajectory_k.csv` holds the increments, likelihood, purity, the
/// normalized state and the observables; `record_k.csv` holds just the
/// increments, in the form replay mode reads back.
fn dump_finite_trajectory(ctx: &mut Context, setup: &TrajectorySetup, observables: &[Observable], k: u64) -> Result<(), CliError> {
    let n = setup.model.dim();
    let width = setup.model.record_width();
    let rec_header = record_header(setup.model);
    let mut header = rec_header.clone();
    header.extend(["log_likelihood".to_string(), "purity".to_string()]);
    for i in 0..n {
        for j in 0..n {
            header.extend([format!("rho_{i}_{j}_re"), format!("rho_{i}_{j}_im")]);
        }
    }
    header.extend(observables.iter().map(|o| o.name.clone()));
    let mut traj = ctx.create(&format!("trajectory_{k}.csv"), &header)?;
    let mut rec = ctx.create(&format!("record_{k}.csv"), &rec_header)?;
    let mut row = Vec::with_capacity(header.len());
    let mut io: Result<(), CliError> = Ok(());
    setup.run(k, |s, dy| {
        if io.is_err() {
            return Ok(());
        }
        let m: CMatrix = s.normalized_matrix();
        row.clear();
        row.push(Field::Num(s.t()));
        match dy {
            Some(dy) => row.extend(dy.iter().map(|x| Field::Num(*x))),
            None => row.extend((0..width).map(|_| Field::Empty)),
        }
        row.extend([Field::Num(s.log_likelihood()), Field::Num(s.purity())]);
        for i in 0..n {
            for j in 0..n {
                row.extend([Field::Num(m[(i, j)].re), Field::Num(m[(i, j)].im)]);
            }
        }
        row.extend(observables.iter().map(|o| Field::Num(o.value(&m))));
        io = traj.fields(&row);
        if let (Some(dy), true) = (dy, io.is_ok()) {
            let mut r = vec![s.t()];
            r.extend_from_slice(dy);
            io = rec.numbers(&r);
        }
        Ok(())
    })?;
    io?;
    traj.finish()?;
    rec.finish()
}

fn upper_header(prefix: &str, d: usize) -> Vec<String> {
    (0..d).flat_map(|i| (i..d).map(move |j| format!("{prefix}_{i}_{j}"))).collect()
}

fn upper(p: &qfilter_core::gaussian::RMatrix) -> impl Iterator<Item = f64> + '_ {
    let d = p.nrows();
    (0..d).flat_map(move |i| (i..d).map(move |j| p[(i, j)]))
}

fn run_kalman(ctx: &mut Context, model: &PhaseSpaceModel) -> Result<Outcome, CliError> {
    let cfg = ctx.cfg;
    let d = model.dim();
    let dd = DriftData::new(model);
    let sol = RiccatiSolution::solve(&dd, model.p0(), ctx.grid)?;

    let mut header = vec!["t".to_string()];
    header.extend(upper_header("P", d));
    let mut w = ctx.create("riccati.csv", &header)?;
    for (k, p) in sol.p.iter().enumerate() {
        let mut row = vec![ctx.grid.time(k)];
        row.extend(upper(p));
        w.numbers(&row)?;
    }
    w.finish()?;

    let replay = ctx.replay(dd.record_width())?;
    let mut setup = KalmanSetup::new(&dd, &sol, model.theta0().clone(), SeedPolicy::new(cfg.master_seed), cfg.mode.into());
    if let Some(rec) = &replay {
        setup = setup.with_replay(rec);
    }
    let reference = cfg.mode == Mode::Reference;
    let mut names: Vec<String> = (0..d).map(|i| format!("theta_{i}")).collect();
    if reference {
        names.push("likelihood".into());
    }
    let checkpoints = ctx.checkpoints();
    let stats = run_ensemble(cfg.n_traj, cfg.workers, |k| {
        let mut out = Vec::with_capacity(checkpoints.len() * names.len());
        let mut next = 0;
        let mut step = 0;
        setup.run(k, |post, dy| {
            if dy.is_some() {
                step += 1;
            }
            if next < checkpoints.len() && step == checkpoints[next] {
                let w = if reference { post.log_rho.exp() } else { 1.0 };
                out.extend(post.theta.iter().map(|x| w * x));
                if reference {
                    out.push(w);
                }
                next += 1;
            }
            Ok(())
        })?;
        Ok(out)
    })?;

    let mut oracle = Vec::new();
    for &step in &checkpoints {
        let (mean, _) = prior_moments(model, ctx.grid.time(step) - ctx.grid.t0)?;
        let known = cfg.mode != Mode::Replay;
        oracle.extend(mean.iter().map(|m| known.then_some(*m)));
        if reference {
            oracle.push(Some(1.0));
        }
    }
    let all = ctx.write_ensemble(&names, &stats, &oracle)?;
    let checks = cfg
        .checks
        .iter()
        .map(|c| match c {
            Check::PriorMean => se_check(*c, worst_deviation(all.iter()), cfg.tolerances.se_limit),
            _ => unreachable!("validated"),
        })
        .collect();

    let mut rec_header = vec!["t".to_string()];
    for (j, kind) in dd.layout.iter().enumerate() {
        match kind {
            ChannelKind::Real => rec_header.push(format!("dY_{j}")),
            ChannelKind::Complex => rec_header.extend([format!("dZ_{j}_re"), format!("dZ_{j}_im")]),
        }
    }
    for k in 0..cfg.outputs.dump_trajectories {
        let mut header: Vec<String> = vec!["t".into()];
        header.extend((0..d).map(|i| format!("theta_{i}")));
        header.extend(upper_header("P", d));
        header.push("log_rho".into());
        let mut traj = ctx.create(&format!("trajectory_{k}.csv"), &header)?;
        let mut rec = ctx.create(&format!("record_{k}.csv"), &rec_header)?;
        let mut io: Result<(), CliError> = Ok(());
        setup.run(k, |post, dy| {
            if io.is_ok() {
                let mut row = vec![post.t];
                row.extend(post.theta.iter());
                row.extend(upper(&post.p));
                row.push(post.log_rho);
                io = traj.numbers(&row);
            }
            if let (Some(dy), true) = (dy, io.is_ok()) {
                let mut r = vec![post.t];
                r.extend_from_slice(dy);
                io = rec.numbers(&r);
            }
            Ok(())
        })?;
        io?;
        traj.finish()?;
        rec.finish()?;
    }

    let mut extra = json!({ "final_covariance": upper(sol.last()).collect::<Vec<_>>() });
    if let Ok(red) = scalar_reduction(model) {
        let p_inf = stationary_covariance(model).ok().map(|p| p[(0, 0)]);
        extra["scalar"] = json!({
            "epsilon": red.epsilon,
            "omega": red.omega,
            "c": red.c,
            "stationary_covariance": p_inf,
            "stationary_gain": p_inf.map(|p| red.gain(p)),
            "collapse_rate": (red.c != 0.0).then(|| red.rate()),
        });
    }
    Ok((final_only(all), checks, extra))
}

fn run_riccati_scalar(ctx: &mut Context, model: &PhaseSpaceModel) -> Result<Outcome, CliError> {
    let cfg = ctx.cfg;
    let red = scalar_reduction(model)?;
    let d = model.dim();
    let p0 = model.p0()[(0, 0)];
    if (model.p0() - qfilter_core::gaussian::RMatrix::identity(d, d) * p0).norm() > 1e-12 * p0.abs().max(1.0) {
        return Err(qfilter_core::Error::NotScalar("P0 is not a multiple of the identity".into()).into());
    }
    let sol = RiccatiSolution::solve(&DriftData::new(model), model.p0(), ctx.grid)?;
    let header = ["t", "p_numeric", "p_closed_form", "rel_err"].map(String::from);
    let mut w = ctx.create("riccati_scalar.csv", &header)?;
    let mut worst: f64 = 0.0;
    for (k, p) in sol.p.iter().enumerate() {
        let t = ctx.grid.time(k) - ctx.grid.t0;
        let closed = red.covariance_at(p0, t);
        let id = qfilter_core::gaussian::RMatrix::identity(d, d);
        let rel = (p - id * closed).norm() / (closed.abs() * (d as f64).sqrt());
        worst = worst.max(rel);
        w.numbers(&[ctx.grid.time(k), p[(0, 0)], closed, rel])?;
    }
    w.finish()?;
    let checks = cfg
        .checks
        .iter()
        .map(|c| CheckResult { check: *c, passed: worst <= cfg.tolerances.rel_tol, value: worst, limit: cfg.tolerances.rel_tol })
        .collect();
    let extra = json!({
        "epsilon": red.epsilon,
        "c": red.c,
        "p0": p0,
        "max_rel_err": worst,
        "stationary": red.stationary(),
    });
    Ok((Vec::new(), checks, extra))
}

/// The resolved configuration of a preset or file, written back as JSON.
pub fn dump_config(cfg: &ExperimentConfig, path: &Path) -> Result<(), CliError> {
    fs::write(path, cfg.to_json() + "\n")?;
    Ok(())
}
