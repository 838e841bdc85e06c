// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

//! Batch runner: JSON experiment configurations in, CSV tables and a
//! `summary.json` out.

// `!(x > 0.0)` style guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod csv;
pub mod error;
pub mod observables;
pub mod presets;
pub mod runner;

pub use config::{validate, Check, Diagnostic, ExperimentConfig, ExperimentKind, Mode};
pub use error::CliError;
pub use presets::{preset, PRESETS};
pub use runner::{run, CheckResult, RunSummary};
