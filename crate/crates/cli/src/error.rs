// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

use crate::config::Diagnostic;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("record file: {0}")]
    Record(String),
    #[error(transparent)]
    Core(#[from] qfilter_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
