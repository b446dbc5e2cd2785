//! The operator `K = D C⁻¹`, its powers, and solvers for `(C + D) u = f`
//! through `(I + K) w = f`, `u = C⁻¹ w`.

mod fused;
mod section;
mod solve;

pub use fused::{apply_k_cubed_fused, apply_k_power_fused, FusedQuadrature};
pub use section::{
    crafted_matrix, finite_section_kernel_check, kernel_dimension, kernel_dimension_scaled, random_matrix, testbed, TestbedRow, TestbedSummary,
    KERNEL_THRESHOLD,
};
pub use solve::{
    assemble_dense, solve_auto, solve_discrete, solve_discrete_with, solve_neumann, Assembly, SolveMethod, SolveOutcome, SolveReport,
    DENSE_UNKNOWN_CAP,
};

use crate::characteristics::{apply_c_inverse, apply_d};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::system::System;

pub fn apply_k(sys: &System, f: &GridFunction) -> Result<GridFunction> {
    if sys.b_is_zero() {
        // D vanishes; still validate the input shape
        if f.m() != sys.n() {
            return Err(Error::Shape(format!("{} components, system has {}", f.m(), sys.n())));
        }
        return Ok(GridFunction::zeros(*f.grid(), f.m()));
    }
    apply_d(sys, &apply_c_inverse(sys, f)?)
}

/// `K^m f` by repeated application on the grid.
pub fn apply_k_power(sys: &System, f: &GridFunction, m: usize) -> Result<GridFunction> {
    if m == 0 {
        return Err(Error::InvalidArgument("power must be at least 1".into()));
    }
    let mut g = apply_k(sys, f)?;
    for _ in 1..m {
        g = apply_k(sys, &g)?;
    }
    Ok(g)
}

/// `[f, K f, …, K^max f]`.
pub fn k_power_sequence(sys: &System, f: &GridFunction, max: usize) -> Result<Vec<GridFunction>> {
    let mut out = Vec::with_capacity(max + 1);
    out.push(f.clone());
    for m in 0..max {
        let next = apply_k(sys, &out[m])?;
        out.push(next);
    }
    Ok(out)
}
