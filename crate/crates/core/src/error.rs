// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("channel {index}: weight {weight} must be finite and nonnegative")]
    InvalidWeight { index: usize, weight: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite entry")]
    NonFinite,

    #[error("dimension {dim} exceeds the dense propagator cap {cap}")]
    TooLarge { dim: usize, cap: usize },

    #[error("step {step}: state became non-finite")]
    NonFiniteStep { step: usize },

    #[error("step {step}: minimum eigenvalue {min_eig:e} below tolerance")]
    NotPositive { step: usize, min_eig: f64 },

    #[error("step {step}: trace {trace:e} is not positive")]
    TraceUnderflow { step: usize, trace: f64 },

    #[error("observation is not complete: {0}")]
    IncompleteObservation(String),

    #[error("detection kind mismatch: {0}")]
    KindMismatch(String),

    #[error("group {0:?} has zero total weight")]
    ZeroWeightGroup(String),

    #[error("expected {expected} increments, got {found}")]
    IncrementCount { expected: usize, found: usize },

    #[error("covariance violates the uncertainty relation: minimum eigenvalue {min_eig:e}")]
    Inadmissible { min_eig: f64 },

    #[error("commutativity condition fails, residual norm {residual:e}")]
    Commutativity { residual: f64 },

    #[error("model is not scalar-reducible: {0}")]
    NotScalar(String),

    #[error("classical limit c = 0: covariance decays algebraically, no exponential rate")]
    ClassicalLimit,

    #[error("truncation leakage {population:e} in the top levels exceeds {limit:e}")]
    Leakage { population: f64, limit: f64 },

    #[error("trajectory {index}: {source}")]
    Trajectory { index: u64, source: Box<Error> },

    #[error("model format: {0}")]
    Format(String),
}

impl Error {
    pub fn in_trajectory(self, index: u64) -> Error {
        Error::Trajectory { index, source: Box::new(self) }
    }
}
