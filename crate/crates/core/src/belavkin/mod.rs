// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

//! Posterior dynamics of a finite-dimensional system under continuous
//! homodyne or heterodyne observation.
//!
//! The state is the unnormalized posterior density `ς`, stepped on the linear
//! equation
//!
//! ```text
//! dς = 𝓛*(ς) dt + Σ_i (L̄_i ς + ς L̄_i†) dY_i          (homodyne)
//! dς = 𝓛*(ς) dt + Σ_i (L̄_i ς dZ_i* + ς L̄_i† dZ_i)    (heterodyne)
//! ```
//!
//! where `𝓛*` is the Lindblad dual built from every channel, `L̄_i` the
//! weight-averaged coupling of signal `i`, and under the reference measure
//! `dY_i dY_i = Λ_i dt`, `dZ_i* dZ_i = Λ_i dt`, `dZ_i dZ_i = 0`.
//! `tr ς` is the likelihood of the record.

mod channel;
mod filter;
mod girsanov;
mod output;

pub use channel::{coarse_grain, compress_dissipator, CoarseGrained, DetectionKind, MeasurementChannel, ObservedChannel};
pub use filter::{
    normalize, step_heterodyne, step_pure_propagator, step_unnormalized, FilterModel, FilterOptions, FilterState, StepScheme, Stepping,
};
pub use girsanov::{girsanov_log_increment, girsanov_moment_ode, girsanov_weighted_moment, StepFunction};
pub use output::{reference_output_into, simulate_output, simulate_output_into, OutputRecord, RecordMode, TrajectorySetup};
