// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qfilter_cli::{preset, run, validate, CliError, ExperimentConfig, PRESETS};

/// Run a quantum filtering experiment from a JSON config or a named preset.
///
/// Exit status: 0 when every requested check passes, 1 when a check fails,
/// 2 for configuration or runtime errors.
#[derive(Parser, Debug)]
#[command(name = "qfilter", version)]
struct Args {
    /// Experiment configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset; see --list.
    #[arg(long)]
    preset: Option<String>,
    /// List the presets and exit.
    #[arg(long)]
    list: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trajectories: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    dump_config: bool,
    /// Report configuration problems and exit.
    #[arg(long)]
    validate: bool,
}

fn load(args: &Args) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => ExperimentConfig::from_json(&std::fs::read_to_string(path)?)?,
        (None, Some(name)) => preset(name).ok_or_else(|| CliError::UnknownPreset(name.clone()))?,
        (None, None) => return Err(CliError::UnknownPreset("(none given; use --config or --preset)".into())),
    };
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if let Some(n) = args.trajectories {
        cfg.n_traj = n;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(d) = &args.out_dir {
        cfg.outputs.dir = d.clone();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.list {
        for p in PRESETS {
            println!("{p}");
        }
        return ExitCode::SUCCESS;
    }
    let cfg = match load(&args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if args.dump_config {
        println!("{}", cfg.to_json());
        return ExitCode::SUCCESS;
    }
    if args.validate {
        let diags = validate(&cfg);
        for d in &diags {
            println!("{d}");
        }
        return if diags.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(2) };
    }
    match run(&cfg) {
        Ok(summary) => {
            for c in &summary.checks {
                let verdict = if c.passed { "PASS" } else { "FAIL" };
                println!("{verdict} {:?}: {:.3e} (limit {:.3e})", c.check, c.value, c.limit);
            }
            println!("wrote {} files to {}", summary.files.len() + 1, cfg.outputs.dir.display());
            if summary.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
