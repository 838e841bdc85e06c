// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

use qfilter_core::{CMatrix, Operator, C64};

/// A named observable of a finite-dimensional model.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    pub name: String,
    pub op: Operator,
}

fn lowering(n: usize) -> CMatrix {
    let mut a = CMatrix::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = C64::from((k as f64).sqrt());
    }
    a
}

impl Observable {
    /// `sigma_x`, `sigma_y`, `sigma_z` on a qubit; `x = a + a†`,
    /// `y = −i(a − a†)` and `n = a†a` on any truncated oscillator.
    pub fn parse(name: &str, dim: usize) -> Result<Self, String> {
        let qubit = |op: Operator| if dim == 2 { Ok(op) } else { Err(format!("{name} needs a 2-level model, got dimension {dim}")) };
        let op = match name {
            "sigma_x" => qubit(Operator::sigma_x())?,
            "sigma_y" => qubit(Operator::sigma_y())?,
            "sigma_z" => qubit(Operator::sigma_z())?,
            "x" | "y" | "n" => {
                let a = lowering(dim);
                let m = match name {
                    "x" => &a + a.adjoint(),
                    "y" => (&a - a.adjoint()) * C64::new(0.0, -1.0),
                    _ => a.adjoint() * &a,
                };
                Operator::new(m).map_err(|e| e.to_string())?
            }
            _ => return Err(format!("unknown observable {name:?}; known: sigma_x, sigma_y, sigma_z, x, y, n")),
        };
        Ok(Self { name: name.to_string(), op })
    }

    /// `Re tr(X m)`.
    pub fn value(&self, m: &CMatrix) -> f64 {
        (self.op.matrix() * m).trace().re
    }
}
