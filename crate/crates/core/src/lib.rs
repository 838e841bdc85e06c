// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

//! Continuous-measurement filtering for open quantum systems.
//!
//! [`belavkin`] propagates the unnormalized posterior of a finite-dimensional
//! system under diffusive (homodyne or heterodyne) observation of coarse-grained
//! channels. [`gaussian`] does the same for linear systems in phase space,
//! where the posterior is Gaussian and the filter reduces to a Kalman mean
//! equation and a Riccati covariance equation. [`stochastic`] supplies the
//! seeded noise and the parallel ensemble harness, and [`models`] the concrete
//! spin and oscillator models.

// `!(x > 0.0)` style guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod belavkin;
pub mod error;
pub mod gaussian;
pub mod models;
pub mod operator;
pub mod stochastic;

pub use error::{Error, Result};
pub use operator::{CMatrix, DensityMatrix, Operator, C64};
pub use stochastic::{EnsembleStats, SeedPolicy, TimeGrid};
