// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

//! Concrete models: a spin-½ measured along every direction, the single-mode
//! open oscillator in phase space, and that oscillator on a truncated Fock
//! space for cross-checking the two filters.

mod catalog;
mod oscillator;
mod spin;


pub use catalog::{
    catalog, oscillator_spec, spin_half_sphere, spin_half_sphere_with, FiniteSystem, ModelSpec, ModelSystem, CATALOG,
};
pub use oscillator::{edge_population, open_oscillator, truncated_fock_bridge, FockBridge, EDGE_LEVELS, LEAKAGE_LIMIT};
pub use spin::{gauss_legendre, sphere_nodes, spin_projection, spin_sphere_system, SphereNode, SpinOptions};
