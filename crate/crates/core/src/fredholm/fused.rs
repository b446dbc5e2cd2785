//! `K^m f` at single points by nested quadrature of the chained
//! characteristic integrals, with no intermediate grid.

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::system::System;

const GL8_NODES: [f64; 4] = [0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363];
const GL8_WEIGHTS: [f64; 4] = [0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763];

/// Gauss–Legendre 8-point nodes and weights on `[a, b]`, split into `panels`.
fn gauss_legendre(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let width = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(8 * panels);
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * width;
        let half = 0.5 * width;
        for (x, w) in GL8_NODES.iter().zip(GL8_WEIGHTS) {
            out.push((mid - half * x, half * w));
            out.push((mid + half * x, half * w));
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct FusedQuadrature {
    /// Gauss–Legendre panels per characteristic integral.
    pub panels: usize,
    /// Panels for the exponent `∫ₓ^ξ γ`.
    pub exponent_panels: usize,
}

impl Default for FusedQuadrature {
    fn default() -> Self {
        FusedQuadrature { panels: 2, exponent_panels: 1 }
    }
}

struct Fused<'a> {
    sys: &'a System,
    f: &'a dyn Field,
    q: FusedQuadrature,
}

impl Fused<'_> {
    /// Component `c` of `K^level f` at `p`.
    fn component(&self, level: usize, c: usize, p: [f64; 3]) -> Result<f64> {
        if level == 0 {
            return self.f.value(c, p[0], p[1], p[2]);
        }
        let sys = self.sys;
        let row = &sys.b_rows[c];
        if row.is_empty() {
            return Ok(0.0);
        }
        // (C⁻¹ g)_j = Σ_r A⁻¹[j][r] v_r; each needed v_r is computed once
        let mut cache: Vec<Option<f64>> = vec![None; sys.n()];
        let mut total = 0.0;
        for (j, coef) in row {
            let b = coef.eval(p[0], p[1], p[2])?;
            if b == 0.0 {
                continue;
            }
            let mut u_j = 0.0;
            for r in sys.block_of(*j) {
                let w = sys.a_inv[(*j, r)];
                if w == 0.0 {
                    continue;
                }
                let v_r = match cache[r] {
                    Some(v) => v,
                    None => {
                        let v = self.characteristic(level - 1, r, p)?;
                        cache[r] = Some(v);
                        v
                    }
                };
                u_j += w * v_r;
            }
            total += b * u_j;
        }
        Ok(total)
    }

    /// `v_r(p)` with the integrand `(K^level f)_r` along line `r`.
    fn characteristic(&self, level: usize, r: usize, p: [f64; 3]) -> Result<f64> {
        let sys = self.sys;
        let [x, y, t] = p;
        let left = sys.is_left_row(r);
        let (a, b) = if left { (0.0, x) } else { (x, 1.0) };
        if b <= a {
            return Ok(0.0);
        }
        let (alpha, beta) = (sys.alpha(r), sys.beta(r));
        let line = |xi: f64| [xi, y + beta * (xi - x), t + alpha * (xi - x)];
        let gamma = &sys.gamma[r];
        let mut sum = 0.0;
        for (xi, w) in gauss_legendre(a, b, self.q.panels) {
            let mut exponent = 0.0;
            if !gamma.is_zero() {
                // ∫ₓ^ξ γ along the same line
                let (lo, hi, sign) = if xi < x { (xi, x, -1.0) } else { (x, xi, 1.0) };
                for (s, ws) in gauss_legendre(lo, hi, self.q.exponent_panels) {
                    let q = line(s);
                    exponent += sign * ws * gamma.eval(q[0], q[1], q[2])?;
                }
            }
            sum += w * exponent.exp() * self.component(level, r, line(xi))?;
        }
        Ok(if left { sum } else { -sum })
    }
}

/// `K^m f` at each probe point.
pub fn apply_k_power_fused(
    sys: &System,
    f: &dyn Field,
    m: usize,
    probes: &[[f64; 3]],
    q: FusedQuadrature,
) -> Result<Vec<Vec<f64>>> {
    use rayon::prelude::*;
    if f.components() != sys.n() {
        return Err(Error::Shape(format!("{} components, system has {}", f.components(), sys.n())));
    }
    if q.panels == 0 || q.exponent_panels == 0 {
        return Err(Error::InvalidArgument("quadrature needs at least one panel".into()));
    }
    let fused = Fused { sys, f, q };
    probes
        .par_iter()
        .map(|p| {
            if !(0.0..=1.0).contains(&p[0]) {
                return Err(Error::Domain { x: p[0] });
            }
            (0..sys.n()).map(|c| fused.component(m, c, *p)).collect()
        })
        .collect()
}

/// `(D C⁻¹)³ f` at each probe point.
pub fn apply_k_cubed_fused(sys: &System, f: &dyn Field, probes: &[[f64; 3]]) -> Result<Vec<Vec<f64>>> {
    apply_k_power_fused(sys, f, 3, probes, FusedQuadrature::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Expr};
    use crate::grid::ExprField;
    use crate::model::SystemSpec;

    #[test]
    fn gauss_legendre_exact_on_degree_15() {
        let nodes = gauss_legendre(-0.3, 1.1, 1);
        let integral: f64 = nodes.iter().map(|(x, w)| w * x.powi(15)).sum();
        let exact = (1.1f64.powi(16) - 0.3f64.powi(16)) / 16.0;
        assert!((integral - exact).abs() < 1e-13);
        let weights: f64 = gauss_legendre(0.0, 2.0, 3).iter().map(|(_, w)| w).sum();
        assert!((weights - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_inputs() {
        let mut spec = SystemSpec::identity(3, 2, 1);
        spec.b[0][2] = parse("1").unwrap();
        spec.b[1][0] = parse("1").unwrap();
        spec.b[2][1] = parse("1").unwrap();
        let sys = System::new(spec).unwrap();
        let zero = vec![Expr::zero(); 3];
        let probes = [[0.3, 0.2, 0.1], [1.0, 0.5, 0.9]];
        let out = apply_k_cubed_fused(&sys, &ExprField::new(&zero), &probes).unwrap();
        assert!(out.iter().flatten().all(|v| *v == 0.0));

        let sys0 = System::new(SystemSpec::identity(3, 2, 1)).unwrap();
        let ones = vec![parse("1").unwrap(); 3];
        let out = apply_k_cubed_fused(&sys0, &ExprField::new(&ones), &probes).unwrap();
        assert!(out.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn constant_chain_by_hand() {
        // identity blocks, unit couplings, zero slopes, f = (0, 0, 1):
        // C⁻¹f = (0, 0, x − 1) → K f = (x − 1, 0, 0)
        // C⁻¹ → (x²/2 − x, 0, 0) → K² f = (0, x²/2 − x, 0)
        // C⁻¹ → (0, x³/6 − x²/2, 0) → K³ f = (0, 0, x³/6 − x²/2)
        let mut spec = SystemSpec::identity(3, 2, 1);
        spec.b[0][2] = parse("1").unwrap();
        spec.b[1][0] = parse("1").unwrap();
        spec.b[2][1] = parse("1").unwrap();
        let sys = System::new(spec).unwrap();
        let f = vec![Expr::zero(), Expr::zero(), parse("1").unwrap()];
        let x = 0.7f64;
        let out = apply_k_cubed_fused(&sys, &ExprField::new(&f), &[[x, 0.4, 0.1]]).unwrap();
        assert!(out[0][0].abs() < 1e-15 && out[0][1].abs() < 1e-15);
        assert!((out[0][2] - (x.powi(3) / 6.0 - x * x / 2.0)).abs() < 1e-14);
    }

    #[test]
    fn constant_damping_matches_closed_form() {
        // γ₃ = 1, f₃ = 1: v₃ = −∫ₓ¹ e^{ξ−x} dξ = 1 − e^{1−x}
        let mut spec = SystemSpec::identity(3, 2, 1);
        spec.gamma[2] = parse("1").unwrap();
        spec.b[0][2] = parse("1").unwrap();
        let sys = System::new(spec).unwrap();
        let f = vec![Expr::zero(), Expr::zero(), parse("1").unwrap()];
        let x = 0.25f64;
        let out = apply_k_power_fused(&sys, &ExprField::new(&f), 1, &[[x, 0.0, 0.0]], FusedQuadrature::default())
            .unwrap();
        assert!((out[0][0] - (1.0 - (1.0 - x).exp())).abs() < 1e-14);
    }
}
