// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

//! Filtering for linear systems with quadratic Hamiltonians, in phase-space
//! coordinates `R` with `[R_a, R_b] = −i S_ab`.
//!
//! A Gaussian state stays Gaussian under the filter. Its mean `ϑ` follows a
//! Kalman-type equation driven by the innovations and its covariance `P`
//! follows a Riccati equation that does not depend on the record.

mod drift;
mod kalman;
mod model;
mod prior;
mod riccati;
mod stationary;


pub use drift::{ComplexSignal, DriftData, RealSignal};
pub use kalman::{
    complex_kalman_step, kalman_mean_step, kalman_mean_step_short, kalman_step, reference_output_into,
    simulate_output_into, GaussianPosterior, KalmanSetup,
};
pub use model::{
    canonical_symplectic, uncertainty_min_eigenvalue, CVector, ChannelKind, PhaseChannel, PhaseSpaceModel, RMatrix,
    RVector,
};
pub use prior::{prior_moments, transport_propagator};
pub use riccati::{riccati_rhs, riccati_rhs_short, riccati_step, RiccatiSolution, ADMISSIBILITY_TOL};
pub use stationary::{collapse_rate, scalar_reduction, stationary_covariance, ScalarReduction};
