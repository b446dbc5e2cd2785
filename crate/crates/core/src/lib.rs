//! Solvers and operator diagnostics for first-order hyperbolic systems
//!
//! ```text
//! Σ_j a_ij (α_i ∂_t + ∂_x + β_i ∂_y + γ_i) u_j + Σ_j b_ij u_j = f_i
//! ```
//!
//! on `[0, 1] × ℝ²`, periodic in `y` and `t`, with `u_i(0) = 0` for `i ≤ k`
//! and `u_i(1) = 0` for `i > k`.
//!
//! The principal part `C` is inverted exactly along characteristics
//! ([`characteristics::apply_c_inverse`]); the coupling `D` turns the problem
//! into `(I + K) w = f` with `K = D C⁻¹` ([`fredholm`]).

pub mod characteristics;
pub mod diagnostics;
pub mod error;
pub mod expr;
pub mod fredholm;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod system;

pub use error::{Error, Result};
pub use expr::{parse, Expr};
pub use grid::{Grid, GridFunction};
pub use model::{BOrientation, SystemSpec, TildeCoefficients, ValidationReport};
pub use system::System;
