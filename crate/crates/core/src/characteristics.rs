//! The principal part `C`, its inverse by integration along
//! characteristics, and the coupling `D`.
//!
//! Row `i` of `C u = f` reads `(d/dξ + γ_i) v_i = f_i` along the line
//! `ξ ↦ (ξ, y + β_i(ξ − x), t + α_i(ξ − x))`, where `v = A u`. With the
//! boundary conditions this gives
//!
//! ```text
//! v_i(x) =  ∫₀ˣ exp(∫ₓ^ξ γ_i) f_i(line_i(ξ)) dξ     i < k   (v_i(0) = 0)
//! v_i(x) = −∫ₓ¹ exp(∫ₓ^ξ γ_i) f_i(line_i(ξ)) dξ     i ≥ k   (v_i(1) = 0)
//! ```
//!
//! and `u = A⁻¹ v`, applied block by block.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, GridFunction};
use crate::system::System;

/// Simpson sub-steps per grid cell (two panels per cell).
const SUBSTEPS: usize = 4;

fn check_input(sys: &System, f: &GridFunction) -> Result<()> {
    if f.m() != sys.n() {
        return Err(Error::Shape(format!("{} components, system has {}", f.m(), sys.n())));
    }
    let g = f.grid();
    if g.period_y != sys.spec().period_y || g.period_t != sys.spec().period_t {
        return Err(Error::Shape("grid periods differ from the system periods".into()));
    }
    Ok(())
}

/// `C⁻¹ f` for a grid function.
pub fn apply_c_inverse(sys: &System, f: &GridFunction) -> Result<GridFunction> {
    check_input(sys, f)?;
    apply_c_inverse_field(sys, f, f.grid())
}

/// `C⁻¹ f` sampled on `grid`, reading `f` wherever the quadrature needs it.
pub fn apply_c_inverse_field(sys: &System, f: &dyn Field, grid: &Grid) -> Result<GridFunction> {
    let n = sys.n();
    if f.components() != n {
        return Err(Error::Shape(format!("{} components, system has {n}", f.components())));
    }
    let nodes = grid.nodes();
    let mut v = vec![0.0; n * nodes];
    for (r, chunk) in v.chunks_mut(nodes).enumerate() {
        if f.is_zero_component(r) {
            continue;
        }
        chunk.par_iter_mut().enumerate().try_for_each(|(node, out)| -> Result<()> {
            let (ix, iy, it) = grid.node_coords(node);
            *out = characteristic_integral(sys, f, r, grid, (ix, iy, it))?;
            Ok(())
        })?;
    }

    let mut u = vec![0.0; n * nodes];
    let a_inv = sys.a_inverse();
    for i in 0..n {
        let block = sys.block_of(i);
        let (dst, _) = u[i * nodes..].split_at_mut(nodes);
        for r in block {
            let w = a_inv[(i, r)];
            if w == 0.0 {
                continue;
            }
            for (d, s) in dst.iter_mut().zip(&v[r * nodes..(r + 1) * nodes]) {
                *d += w * s;
            }
        }
        // boundary rows are zero by construction; pin them exactly
        let ix_bc = if sys.is_left_row(i) { 0 } else { grid.nx };
        let plane = grid.plane();
        dst[ix_bc * plane..(ix_bc + 1) * plane].fill(0.0);
    }
    GridFunction::from_values(*grid, n, u)
}

/// `v_r` at one node; composite Simpson with panels of half a cell and the
/// exponent accumulated by the trapezoid rule on the same sub-steps.
fn characteristic_integral(
    sys: &System,
    f: &dyn Field,
    r: usize,
    grid: &Grid,
    (ix, iy, it): (usize, usize, usize),
) -> Result<f64> {
    let left = sys.is_left_row(r);
    let steps = SUBSTEPS * if left { ix } else { grid.nx - ix };
    if steps == 0 {
        return Ok(0.0);
    }
    let denom = (SUBSTEPS * grid.nx) as f64;
    let start = (SUBSTEPS * ix) as i64;
    let dir: i64 = if left { -1 } else { 1 };
    let h = 1.0 / denom;
    let (x, y, t) = (grid.x(ix), grid.y(iy), grid.t(it));
    let (alpha, beta) = (sys.alpha(r), sys.beta(r));
    let gamma = &sys.gamma[r];

    let mut exponent = 0.0;
    let mut gamma_prev = 0.0;
    let mut sum = 0.0;
    for m in 0..=steps {
        let xi = (start + dir * m as i64) as f64 / denom;
        let yl = y + beta * (xi - x);
        let tl = t + alpha * (xi - x);
        if !gamma.is_zero() {
            let g = gamma.eval(xi, yl, tl).map_err(|e| Error::at_node(e, r, ix, iy, it))?;
            if m > 0 {
                exponent += dir as f64 * 0.5 * h * (gamma_prev + g);
            }
            gamma_prev = g;
        }
        let weight = if m == 0 || m == steps {
            1.0
        } else if m % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += weight * exponent.exp() * f.value(r, xi, yl, tl)?;
    }
    let integral = sum * h / 3.0;
    Ok(if left { integral } else { -integral })
}

/// Default finite-difference parameter for [`apply_c`].
pub fn default_step(sys: &System, grid: &Grid) -> f64 {
    const EPS: f64 = 1e-12;
    let sx = 1.0 / (4.0 * grid.nx as f64);
    let sy = grid.period_y / (4.0 * grid.ny as f64 * sys.max_abs_beta() + EPS);
    let st = grid.period_t / (4.0 * grid.nt as f64 * sys.max_abs_alpha() + EPS);
    sx.min(sy).min(st)
}

/// `C u` by directional differences along each row's characteristic;
/// central inside, second-order one-sided within `step` of `x = 0, 1`.
pub fn apply_c(sys: &System, u: &GridFunction, step: f64) -> Result<GridFunction> {
    check_input(sys, u)?;
    if !(step > 0.0 && 2.0 * step <= 1.0) {
        return Err(Error::InvalidArgument(format!("step {step} must lie in (0, 1/2]")));
    }
    let n = sys.n();
    let grid = *u.grid();
    let nodes = grid.nodes();
    let mut out = vec![0.0; n * nodes];
    out.par_chunks_mut(nodes).enumerate().try_for_each(|(i, dst)| -> Result<()> {
        let (alpha, beta) = (sys.alpha(i), sys.beta(i));
        let gamma = &sys.gamma[i];
        for (node, d) in dst.iter_mut().enumerate() {
            let (ix, iy, it) = grid.node_coords(node);
            let [x, y, t] = grid.point(node);
            let at = |j: usize, s: f64| u.interpolate_component(j, x + s, y + beta * s, t + alpha * s);
            let g = gamma.eval(x, y, t).map_err(|e| Error::at_node(e, i, ix, iy, it))?;
            let mut acc = 0.0;
            for j in sys.block_of(i) {
                let a = sys.a[(i, j)];
                if a == 0.0 {
                    continue;
                }
                let center = u.get(j, ix, iy, it);
                let deriv = if x - step < 0.0 {
                    (-3.0 * center + 4.0 * at(j, step)? - at(j, 2.0 * step)?) / (2.0 * step)
                } else if x + step > 1.0 {
                    (3.0 * center - 4.0 * at(j, -step)? + at(j, -2.0 * step)?) / (2.0 * step)
                } else {
                    (at(j, step)? - at(j, -step)?) / (2.0 * step)
                };
                acc += a * (deriv + g * center);
            }
            *d = acc;
        }
        Ok(())
    })?;
    GridFunction::from_values(grid, n, out)
}

/// `D u`: pointwise product with `B(x, y, t)`.
pub fn apply_d(sys: &System, u: &GridFunction) -> Result<GridFunction> {
    check_input(sys, u)?;
    let n = sys.n();
    let grid = *u.grid();
    let nodes = grid.nodes();
    let mut out = vec![0.0; n * nodes];
    out.par_chunks_mut(nodes).enumerate().try_for_each(|(i, dst)| -> Result<()> {
        for (j, coef) in &sys.b_rows[i] {
            if u.component_is_zero(*j) {
                continue;
            }
            let src = u.component(*j);
            for (node, d) in dst.iter_mut().enumerate() {
                let [x, y, t] = grid.point(node);
                let b = coef.eval(x, y, t).map_err(|e| {
                    let (ix, iy, it) = grid.node_coords(node);
                    Error::at_node(e, i, ix, iy, it)
                })?;
                *d += b * src[node];
            }
        }
        Ok(())
    })?;
    GridFunction::from_values(grid, n, out)
}

/// `sup |(C + D) u − f|` over the grid.
pub fn residual(sys: &System, u: &GridFunction, f: &GridFunction, step: f64) -> Result<f64> {
    let cu = apply_c(sys, u, step)?;
    let du = apply_d(sys, u)?;
    Ok(cu.add(&du)?.sub(f)?.sup_norm())
}
