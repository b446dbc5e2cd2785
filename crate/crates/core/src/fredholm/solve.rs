//! Solvers for `(I + K) w = f` followed by `u = C⁻¹ w`.
//!
//! The Neumann iteration is the fast path when `K` contracts. The discrete
//! path assembles the matrix of `I + K` on the grid from unit impulses and
//! solves it by SVD least squares, reporting the numerical kernel. When `γ`
//! and `B` do not depend on `(y, t)` the matrix is block circulant over the
//! transversal grid, and the 2-D DFT splits it into one small block per
//! frequency; the singular values of the full matrix are the union of the
//! blocks' singular values, so rank revelation is unchanged.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use super::{apply_k, KERNEL_THRESHOLD};
use crate::characteristics::{apply_c_inverse, default_step, residual};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::system::System;

/// Largest dense system `solve_discrete` will assemble.
pub const DENSE_UNKNOWN_CAP: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Neumann,
    DiscreteLinearSolve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assembly {
    /// Fourier blocks when the coefficients allow it, dense otherwise.
    Auto,
    Dense,
    Fourier,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub u: GridFunction,
    /// Solution of `(I + K) w = f`.
    pub w: GridFunction,
    pub method: SolveMethod,
    pub assembly: Option<Assembly>,
    pub iterations: usize,
    /// `sup |(C + D) u − f|` with the default difference step.
    pub residual_sup: f64,
    /// `sup |(I + K) w − f|`.
    pub discrete_residual: f64,
    pub kernel_dimension_estimate: Option<usize>,
    /// Sup-norm of successive Neumann updates.
    pub update_history: Vec<f64>,
}

/// The serializable part of a [`SolveOutcome`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: SolveMethod,
    pub assembly: Option<Assembly>,
    pub iterations: usize,
    pub residual_sup: f64,
    pub discrete_residual: f64,
    pub kernel_dimension_estimate: Option<usize>,
}

impl SolveOutcome {
    pub fn report(&self) -> SolveReport {
        SolveReport {
            method: self.method,
            assembly: self.assembly,
            iterations: self.iterations,
            residual_sup: self.residual_sup,
            discrete_residual: self.discrete_residual,
            kernel_dimension_estimate: self.kernel_dimension_estimate,
        }
    }
}

fn finish(
    sys: &System,
    f: &GridFunction,
    w: GridFunction,
    method: SolveMethod,
    assembly: Option<Assembly>,
    iterations: usize,
    kernel: Option<usize>,
    history: Vec<f64>,
) -> Result<SolveOutcome> {
    let u = apply_c_inverse(sys, &w)?;
    let discrete_residual = w.add(&apply_k(sys, &w)?)?.sub(f)?.sup_norm();
    let residual_sup = residual(sys, &u, f, default_step(sys, f.grid()))?;
    Ok(SolveOutcome {
        u,
        w,
        method,
        assembly,
        iterations,
        residual_sup,
        discrete_residual,
        kernel_dimension_estimate: kernel,
        update_history: history,
    })
}

/// `w ← f − K w` from `w = f` until the update is `≤ tol · ‖f‖`.
pub fn solve_neumann(sys: &System, f: &GridFunction, tol: f64, max_iter: usize) -> Result<SolveOutcome> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let target = tol * f.sup_norm();
    let mut w = f.clone();
    let mut history = Vec::new();
    for iteration in 1..=max_iter {
        let next = f.sub(&apply_k(sys, &w)?)?;
        let update = next.sub(&w)?.sup_norm();
        history.push(update);
        w = next;
        if !update.is_finite() {
            break;
        }
        if update <= target {
            return finish(sys, f, w, SolveMethod::Neumann, None, iteration, None, history);
        }
    }
    Err(Error::NonConvergence {
        iterations: history.len(),
        last_update: history.last().copied().unwrap_or(f64::NAN),
    })
}

/// Finite-section solve with automatic assembly.
pub fn solve_discrete(sys: &System, f: &GridFunction) -> Result<SolveOutcome> {
    solve_discrete_with(sys, f, Assembly::Auto)
}

pub fn solve_discrete_with(sys: &System, f: &GridFunction, assembly: Assembly) -> Result<SolveOutcome> {
    let assembly = match assembly {
        Assembly::Auto if sys.is_translation_invariant() => Assembly::Fourier,
        Assembly::Auto => Assembly::Dense,
        other => other,
    };
    let (w, kernel) = match assembly {
        Assembly::Dense => dense_solve(sys, f)?,
        Assembly::Fourier => {
            if !sys.is_translation_invariant() {
                return Err(Error::InvalidArgument(
                    "Fourier assembly needs γ and B independent of y and t".into(),
                ));
            }
            fourier_solve(sys, f)?
        }
        Assembly::Auto => unreachable!(),
    };
    finish(sys, f, w, SolveMethod::DiscreteLinearSolve, Some(assembly), 1, Some(kernel), Vec::new())
}

/// Neumann first, the discrete solve when the iteration fails.
pub fn solve_auto(sys: &System, f: &GridFunction, tol: f64, max_iter: usize) -> Result<SolveOutcome> {
    match solve_neumann(sys, f, tol, max_iter) {
        Err(Error::NonConvergence { .. }) => solve_discrete(sys, f),
        other => other,
    }
}

/// Matrix of `I + K` on the grid; column order is the storage order
/// `(component, ix, iy, it)`.
pub fn assemble_dense(sys: &System, grid: &Grid) -> Result<DMatrix<f64>> {
    let n = sys.n();
    let unknowns = n * grid.nodes();
    if unknowns > DENSE_UNKNOWN_CAP {
        return Err(Error::TooLarge { unknowns, cap: DENSE_UNKNOWN_CAP });
    }
    let columns: Vec<Vec<f64>> = (0..unknowns)
        .into_par_iter()
        .map(|col| {
            let (c, node) = (col / grid.nodes(), col % grid.nodes());
            let (ix, iy, it) = grid.node_coords(node);
            let e = GridFunction::impulse(*grid, n, c, ix, iy, it);
            let mut v = apply_k(sys, &e)?.into_values();
            v[col] += 1.0;
            Ok(v)
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(unknowns, unknowns, |i, j| columns[j][i]))
}

fn dense_solve(sys: &System, f: &GridFunction) -> Result<(GridFunction, usize)> {
    let grid = *f.grid();
    let m = assemble_dense(sys, &grid)?;
    let svd = m.svd(true, true);
    let cutoff = KERNEL_THRESHOLD * svd.singular_values.max();
    let kernel = svd.singular_values.iter().filter(|&&s| s <= cutoff).count();
    let rhs = DVector::from_column_slice(f.values());
    let w = svd.solve(&rhs, cutoff).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok((GridFunction::from_values(grid, sys.n(), w.as_slice().to_vec())?, kernel))
}

struct Fft2 {
    ny: usize,
    nt: usize,
    along_t: Arc<dyn Fft<f64>>,
    along_y: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(ny: usize, nt: usize, inverse: bool) -> Self {
        let mut planner = FftPlanner::new();
        let (along_t, along_y) = if inverse {
            (planner.plan_fft_inverse(nt), planner.plan_fft_inverse(ny))
        } else {
            (planner.plan_fft_forward(nt), planner.plan_fft_forward(ny))
        };
        Fft2 { ny, nt, along_t, along_y }
    }

    /// In-place transform of a row-major `ny × nt` plane (unnormalized).
    fn process(&self, plane: &mut [Complex64]) {
        for row in plane.chunks_mut(self.nt) {
            self.along_t.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); self.ny];
        for it in 0..self.nt {
            for iy in 0..self.ny {
                col[iy] = plane[iy * self.nt + it];
            }
            self.along_y.process(&mut col);
            for iy in 0..self.ny {
                plane[iy * self.nt + it] = col[iy];
            }
        }
    }

    fn forward_real(&self, data: &[f64]) -> Vec<Complex64> {
        let mut plane: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.process(&mut plane);
        plane
    }
}

/// Block-circulant solve: one `n(nx+1)`-square block per transversal
/// frequency, built from impulses placed at `iy = it = 0`.
fn fourier_solve(sys: &System, f: &GridFunction) -> Result<(GridFunction, usize)> {
    let grid = *f.grid();
    let n = sys.n();
    let slots = n * (grid.nx + 1);
    let plane = grid.plane();
    if slots > DENSE_UNKNOWN_CAP {
        return Err(Error::TooLarge { unknowns: slots, cap: DENSE_UNKNOWN_CAP });
    }
    let fft = Fft2::new(grid.ny, grid.nt, false);

    // blocks[k][(s, s')]: spectrum of the response in slot s to an impulse in slot s'
    let mut blocks: Vec<DMatrix<Complex64>> = vec![DMatrix::identity(slots, slots); plane];
    for col in 0..slots {
        let (c, ix) = (col / (grid.nx + 1), col % (grid.nx + 1));
        let response = apply_k(sys, &GridFunction::impulse(grid, n, c, ix, 0, 0))?;
        let spectra: Vec<(usize, Vec<Complex64>)> = (0..slots)
            .into_par_iter()
            .filter_map(|row| {
                let start = row * plane;
                let data = &response.values()[start..start + plane];
                if data.iter().all(|v| *v == 0.0) {
                    None
                } else {
                    Some((row, fft.forward_real(data)))
                }
            })
            .collect();
        for (row, spectrum) in spectra {
            for (k, value) in spectrum.into_iter().enumerate() {
                blocks[k][(row, col)] += value;
            }
        }
    }

    let rhs_hat: Vec<Vec<Complex64>> = (0..slots)
        .into_par_iter()
        .map(|s| fft.forward_real(&f.values()[s * plane..(s + 1) * plane]))
        .collect();

    let sigma_max = blocks
        .par_iter()
        .map(|b| b.clone().svd(false, false).singular_values.max())
        .reduce(|| 0.0, f64::max);
    let cutoff = KERNEL_THRESHOLD * sigma_max;

    let solved: Vec<(DVector<Complex64>, usize)> = blocks
        .into_par_iter()
        .enumerate()
        .map(|(k, b)| {
            let svd = b.svd(true, true);
            let kernel = svd.singular_values.iter().filter(|&&s| s <= cutoff).count();
            let rhs = DVector::from_fn(slots, |s, _| rhs_hat[s][k]);
            let w = svd.solve(&rhs, cutoff).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            Ok((w, kernel))
        })
        .collect::<Result<_>>()?;
    let kernel = solved.iter().map(|(_, k)| k).sum();

    let inverse = Fft2::new(grid.ny, grid.nt, true);
    let scale = 1.0 / plane as f64;
    let planes: Vec<Vec<f64>> = (0..slots)
        .into_par_iter()
        .map(|s| {
            let mut spec: Vec<Complex64> = solved.iter().map(|(w, _)| w[s]).collect();
            inverse.process(&mut spec);
            spec.iter().map(|z| z.re * scale).collect()
        })
        .collect();
    let w = GridFunction::from_values(grid, n, planes.concat())?;
    Ok((w, kernel))
}
