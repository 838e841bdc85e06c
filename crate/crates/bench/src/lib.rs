// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

//! Criterion benchmarks for the filters; see `benches/filters.rs`.
