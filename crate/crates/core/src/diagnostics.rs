//! Finite-grid evidence for the compactness argument: the Jacobian of the
//! change of variables from the chained integrals to the transversal
//! coordinates, and measured moduli of continuity of `Kᵐ f` for oscillating
//! inputs.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::fredholm::k_power_sequence;
use crate::grid::{sample, Grid, GridFunction};
use crate::model::{compute_tilde, condition_ab, Group, TildeCoefficients};
use crate::system::System;

/// Identity tolerance between the Jacobian and the nondegeneracy value.
pub const JACOBIAN_TOLERANCE: f64 = 1e-13;

/// `(μ, η)` reached from `(x, y, t)` by following line `r` to `ξ`, then line
/// `p` to `ξ₁`, then line `m` back to the plane `ξ₂ = 0`.
pub fn map23(tilde: &TildeCoefficients, r: usize, p: usize, m: usize, at: [f64; 3], xi: f64, xi1: f64) -> (f64, f64) {
    let (a, b) = (&tilde.alpha_tilde, &tilde.beta_tilde);
    let [x, y, t] = at;
    let mu = y - b[r] * x + xi * (b[r] - b[p]) + xi1 * (b[p] - b[m]);
    let eta = t - a[r] * x + xi * (a[r] - a[p]) + xi1 * (a[p] - a[m]);
    (mu, eta)
}

/// Determinant of `(ξ, ξ₁) ↦ (μ, η)`, read off from unit increments of the map.
pub fn jacobian_map23(tilde: &TildeCoefficients, r: usize, p: usize, m: usize) -> f64 {
    let origin = [0.0; 3];
    let (mu0, eta0) = map23(tilde, r, p, m, origin, 0.0, 0.0);
    let (mu_a, eta_a) = map23(tilde, r, p, m, origin, 1.0, 0.0);
    let (mu_b, eta_b) = map23(tilde, r, p, m, origin, 0.0, 1.0);
    let (dmu_dxi, deta_dxi) = (mu_a - mu0, eta_a - eta0);
    let (dmu_dxi1, deta_dxi1) = (mu_b - mu0, eta_b - eta0);
    dmu_dxi * deta_dxi1 - dmu_dxi1 * deta_dxi
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianRow {
    /// One-based `(r, p, m)`.
    pub triple: [usize; 3],
    pub jacobian: f64,
    pub condition_ab: f64,
    pub difference: f64,
}

impl JacobianRow {
    pub fn within_tolerance(&self) -> bool {
        self.difference <= JACOBIAN_TOLERANCE * self.condition_ab.abs().max(1.0)
    }
}

/// Jacobian and nondegeneracy value on every triple `G1 × G2 × G3`.
pub fn jacobian_table(sys: &System) -> Vec<JacobianRow> {
    let spec = sys.spec();
    let tilde = compute_tilde(spec);
    let mut rows = Vec::new();
    for r in spec.group_range(Group::First) {
        for p in spec.group_range(Group::Second) {
            for m in spec.group_range(Group::Third) {
                let jacobian = jacobian_map23(&tilde, r, p, m);
                let value = condition_ab(&tilde, r, p, m);
                rows.push(JacobianRow {
                    triple: [r + 1, p + 1, m + 1],
                    jacobian,
                    condition_ab: value,
                    difference: (jacobian - value).abs(),
                });
            }
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusRow {
    pub power: usize,
    pub omega: f64,
    pub h: f64,
    /// Running maximum of `raw` over the measured shifts up to `h`.
    pub modulus: f64,
    /// `modulus` divided by the interpolation smearing seen on the power-0 row.
    pub normalized: f64,
    /// `‖Kᵐf(· + h) − Kᵐf‖ / ‖f‖` at this shift alone.
    pub raw: f64,
    pub skipped_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementRow {
    pub power: usize,
    pub omega: f64,
    pub hx: f64,
    pub value: f64,
    pub skipped_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    /// One-based component carrying the oscillating input.
    pub input_component: usize,
    pub grid: [usize; 3],
    pub moduli: Vec<ModulusRow>,
    pub jacobians: Vec<JacobianRow>,
    /// Increments in `x`; reported, not gated.
    pub x_increments: Vec<IncrementRow>,
}

pub const MODULI_CSV_HEADER: [&str; 5] = ["power", "omega", "h", "modulus", "normalized"];

impl DiagnosticsReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(MODULI_CSV_HEADER)?;
        for row in &self.moduli {
            out.write_record(&[
                row.power.to_string(),
                row.omega.to_string(),
                row.h.to_string(),
                row.modulus.to_string(),
                row.normalized.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The row for `(power, omega)` at shift `h`, matched to `1e-12`.
    pub fn modulus(&self, power: usize, omega: f64, h: f64) -> Option<&ModulusRow> {
        self.moduli
            .iter()
            .find(|r| r.power == power && r.omega == omega && (r.h - h).abs() <= 1e-12 * h.abs().max(1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRequest {
    pub powers: Vec<usize>,
    pub frequencies: Vec<f64>,
    /// Extra `y`-shifts measured next to `Y / (2ω)`.
    #[serde(default)]
    pub shifts: Vec<f64>,
    /// Zero-based; defaults to the first component of the third group.
    #[serde(default)]
    pub input_component: Option<usize>,
}

/// `sin(2πωy/Y)` in component `c`, zero elsewhere.
pub fn oscillating_input(grid: &Grid, n: usize, c: usize, omega: f64) -> Result<GridFunction> {
    let wave = parse(&format!("sin(2*pi*{omega}*y/{})", grid.period_y))?;
    let exprs: Vec<Expr> = (0..n).map(|i| if i == c { wave.clone() } else { Expr::zero() }).collect();
    sample(&exprs, grid)
}

pub fn smoothing_profile(sys: &System, grid: &Grid, req: &ProfileRequest) -> Result<DiagnosticsReport> {
    let n = sys.n();
    let c = req.input_component.unwrap_or(sys.k());
    if c >= n {
        return Err(Error::InvalidArgument(format!("input component {} out of range", c + 1)));
    }
    if req.frequencies.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidArgument("frequencies must be positive".into()));
    }
    if req.shifts.iter().any(|h| !(*h >= 0.0)) {
        return Err(Error::InvalidArgument("shifts must be nonnegative".into()));
    }
    let mut powers = req.powers.clone();
    powers.push(0);
    powers.sort_unstable();
    powers.dedup();
    let max_power = *powers.last().unwrap();
    let period = grid.period_y;

    let mut moduli = Vec::new();
    let mut x_increments = Vec::new();
    for &omega in &req.frequencies {
        let f = oscillating_input(grid, n, c, omega)?;
        let scale = f.sup_norm();
        if scale == 0.0 {
            return Err(Error::InvalidArgument(format!("input at ω = {omega} vanishes on the grid")));
        }
        let seq = k_power_sequence(sys, &f, max_power)?;

        let mut shifts = req.shifts.clone();
        shifts.push(period / (2.0 * omega));
        shifts.sort_by(f64::total_cmp);
        shifts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1.0));

        // smearing of the unsmoothed input against |sin(θ + δ) − sin θ| ≤ 2|sin(δ/2)|
        let smear: Vec<f64> = shifts
            .iter()
            .map(|&h| {
                let exact = 2.0 * (PI * omega * h / period).sin().abs();
                let measured = f.shift_diff_norm([0.0, h, 0.0]).0 / scale;
                if exact > 1e-12 && measured > 0.0 {
                    measured / exact
                } else {
                    1.0
                }
            })
            .collect();

        for &m in &powers {
            let g = &seq[m];
            let mut running = 0.0f64;
            for (&h, s) in shifts.iter().zip(&smear) {
                let (diff, skipped) = g.shift_diff_norm([0.0, h, 0.0]);
                let raw = diff / scale;
                running = running.max(raw);
                moduli.push(ModulusRow {
                    power: m,
                    omega,
                    h,
                    modulus: running,
                    normalized: running / s,
                    raw,
                    skipped_nodes: skipped,
                });
            }
            for &hx in shifts.iter().filter(|h| **h <= 1.0) {
                let (diff, skipped) = g.shift_diff_norm([hx, 0.0, 0.0]);
                x_increments.push(IncrementRow { power: m, omega, hx, value: diff / scale, skipped_nodes: skipped });
            }
        }
    }
    Ok(DiagnosticsReport {
        input_component: c + 1,
        grid: [grid.nx, grid.ny, grid.nt],
        moduli,
        jacobians: jacobian_table(sys),
        x_increments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SystemSpec;

    fn tilde(alpha: &[f64], beta: &[f64]) -> TildeCoefficients {
        TildeCoefficients { alpha_tilde: alpha.to_vec(), beta_tilde: beta.to_vec() }
    }

    fn cyclic(alpha: [f64; 3], beta: [f64; 3]) -> System {
        let mut spec = SystemSpec::identity(3, 2, 1);
        spec.alpha = alpha.to_vec();
        spec.beta = beta.to_vec();
        spec.b[0][2] = parse("1").unwrap();
        spec.b[1][0] = parse("1").unwrap();
        spec.b[2][1] = parse("1").unwrap();
        System::new(spec).unwrap()
    }

    #[test]
    fn unit_example() {
        let t = tilde(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]);
        assert_eq!(jacobian_map23(&t, 0, 1, 2), -1.0);
    }

    #[test]
    fn equal_slopes_are_singular() {
        let t = tilde(&[0.4; 3], &[-1.5; 3]);
        assert_eq!(jacobian_map23(&t, 0, 1, 2), 0.0);
    }

    #[test]
    fn map_is_affine() {
        let t = tilde(&[0.3, -1.2, 2.0], &[0.7, 0.1, -0.9]);
        let at = [0.4, 0.2, 0.9];
        let (m0, e0) = map23(&t, 0, 1, 2, at, 0.0, 0.0);
        let (m1, e1) = map23(&t, 0, 1, 2, at, 0.25, 0.5);
        let (m2, e2) = map23(&t, 0, 1, 2, at, 0.5, 1.0);
        assert!((m2 - m0 - 2.0 * (m1 - m0)).abs() < 1e-14);
        assert!((e2 - e0 - 2.0 * (e1 - e0)).abs() < 1e-14);
    }

    #[test]
    fn table_covers_triples() {
        let sys = cyclic([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let rows = jacobian_table(&sys);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].triple, [1, 2, 3]);
        assert!(rows[0].within_tolerance());
    }

    #[test]
    fn identity_row_is_two() {
        let sys = cyclic([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let g = Grid::new(4, 16, 4, 1.0, 1.0).unwrap();
        let req = ProfileRequest { powers: vec![1], frequencies: vec![2.0], shifts: vec![], input_component: None };
        let report = smoothing_profile(&sys, &g, &req).unwrap();
        let row = report.modulus(0, 2.0, 0.25).unwrap();
        assert!((row.modulus - 2.0).abs() < 1e-12);
        assert!((row.normalized - 2.0).abs() < 1e-12);
        assert_eq!(report.input_component, 3);
    }

    #[test]
    fn zero_coupling_has_zero_moduli() {
        let sys = System::new(SystemSpec::identity(3, 2, 1)).unwrap();
        let g = Grid::new(4, 16, 4, 1.0, 1.0).unwrap();
        let req =
            ProfileRequest { powers: vec![1, 2, 3], frequencies: vec![2.0], shifts: vec![0.125], input_component: None };
        let report = smoothing_profile(&sys, &g, &req).unwrap();
        assert!(report.moduli.iter().filter(|r| r.power > 0).all(|r| r.modulus == 0.0));
    }

    #[test]
    fn moduli_are_monotone_in_h() {
        let sys = cyclic([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let g = Grid::new(8, 32, 8, 1.0, 1.0).unwrap();
        let shifts = vec![1.0 / 32.0, 1.0 / 16.0, 0.125, 0.25, 0.5];
        let req = ProfileRequest { powers: vec![1, 2, 3], frequencies: vec![2.0, 4.0], shifts, input_component: None };
        let report = smoothing_profile(&sys, &g, &req).unwrap();
        for pair in report.moduli.windows(2) {
            if pair[0].power == pair[1].power && pair[0].omega == pair[1].omega {
                assert!(pair[1].modulus >= pair[0].modulus * 0.95);
            }
        }
    }

    #[test]
    fn csv_header() {
        let sys = cyclic([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let g = Grid::new(4, 8, 4, 1.0, 1.0).unwrap();
        let req = ProfileRequest { powers: vec![1], frequencies: vec![1.0], shifts: vec![], input_component: Some(0) };
        let report = smoothing_profile(&sys, &g, &req).unwrap();
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "power,omega,h,modulus,normalized");
        assert_eq!(text.lines().count(), 1 + report.moduli.len());
    }

    #[test]
    fn rejects_bad_requests() {
        let sys = cyclic([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let g = Grid::new(4, 8, 4, 1.0, 1.0).unwrap();
        let bad = ProfileRequest { powers: vec![1], frequencies: vec![1.0], shifts: vec![], input_component: Some(3) };
        assert!(smoothing_profile(&sys, &g, &bad).is_err());
        let bad = ProfileRequest { powers: vec![1], frequencies: vec![0.0], shifts: vec![], input_component: None };
        assert!(smoothing_profile(&sys, &g, &bad).is_err());
    }
}
