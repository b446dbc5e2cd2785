//! Problem statement: dimensions, block structure of `A` and `B`, slopes and
//! periods, and the structural checks the solvers rely on.
//!
//! Components are split into three groups by the indices `l < k < n`:
//! `G1 = 1..=l`, `G2 = l+1..=k`, `G3 = k+1..=n`. `A` is block diagonal over
//! the groups. `B` couples the groups cyclically; in the forward orientation
//! rows of `G1` read `G3`, rows of `G2` read `G1` and rows of `G3` read `G2`,
//! the mirrored orientation reverses the cycle.
//!
//! Indices are zero-based in code and one-based in reports.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::expr::{check_periodicity, Expr};
use crate::linalg;

/// Blocks with `|det|` at or below this are treated as singular.
pub const DET_TOLERANCE: f64 = 1e-12;
/// Relative tolerance of the nondegeneracy determinant.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;
pub const PERIODICITY_TOLERANCE: f64 = 1e-9;
pub const PERIODICITY_SAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BOrientation {
    #[default]
    Forward,
    Mirrored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Group {
    First,
    Second,
    Third,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub a1: Vec<Vec<f64>>,
    pub a2: Vec<Vec<f64>>,
    pub a3: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub period_y: f64,
    pub period_t: f64,
    #[serde(default)]
    pub b_orientation: BOrientation,
    pub gamma: Vec<Expr>,
    pub b: Vec<Vec<Expr>>,
}

impl SystemSpec {
    pub fn group_range(&self, g: Group) -> Range<usize> {
        match g {
            Group::First => 0..self.l,
            Group::Second => self.l..self.k,
            Group::Third => self.k..self.n,
        }
    }

    pub fn group_of(&self, i: usize) -> Group {
        if i < self.l {
            Group::First
        } else if i < self.k {
            Group::Second
        } else {
            Group::Third
        }
    }

    /// The group whose components row group `g` reads through `B`.
    pub fn feeding_group(&self, g: Group) -> Group {
        match (self.b_orientation, g) {
            (BOrientation::Forward, Group::First) => Group::Third,
            (BOrientation::Forward, Group::Second) => Group::First,
            (BOrientation::Forward, Group::Third) => Group::Second,
            (BOrientation::Mirrored, Group::First) => Group::Second,
            (BOrientation::Mirrored, Group::Second) => Group::Third,
            (BOrientation::Mirrored, Group::Third) => Group::First,
        }
    }

    /// Whether `b[i][j]` may be nonzero under the chosen orientation.
    pub fn pattern_allows(&self, i: usize, j: usize) -> bool {
        self.feeding_group(self.group_of(i)) == self.group_of(j)
    }

    /// Row `i` of `B` is literally zero.
    pub fn b_row_is_zero(&self, i: usize) -> bool {
        self.b.get(i).map_or(true, |row| row.iter().all(Expr::is_literal_zero))
    }

    /// Every `b_ij` is literally zero.
    pub fn b_is_zero(&self) -> bool {
        (0..self.n).all(|i| self.b_row_is_zero(i))
    }

    /// Identity blocks, zero `gamma` and `B`, all slopes zero, unit periods.
    pub fn identity(n: usize, k: usize, l: usize) -> Self {
        let eye = |m: usize| -> Vec<Vec<f64>> {
            (0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
        };
        SystemSpec {
            n,
            k,
            l,
            a1: eye(l),
            a2: eye(k.saturating_sub(l)),
            a3: eye(n.saturating_sub(k)),
            alpha: vec![0.0; n],
            beta: vec![0.0; n],
            period_y: 1.0,
            period_t: 1.0,
            b_orientation: BOrientation::Forward,
            gamma: vec![Expr::zero(); n],
            b: vec![vec![Expr::zero(); n]; n],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TildeCoefficients {
    pub alpha_tilde: Vec<f64>,
    pub beta_tilde: Vec<f64>,
}

impl TildeCoefficients {
    /// Largest absolute slope, at least one, squared.
    pub fn scale(&self) -> f64 {
        let m = self
            .alpha_tilde
            .iter()
            .chain(&self.beta_tilde)
            .fold(1.0f64, |acc, v| acc.max(v.abs()));
        m * m
    }
}

/// Slopes of rows with a literally-zero `B` row are replaced by zero.
pub fn compute_tilde(spec: &SystemSpec) -> TildeCoefficients {
    let (alpha_tilde, beta_tilde) = (0..spec.n)
        .map(|i| {
            if spec.b_row_is_zero(i) {
                (0.0, 0.0)
            } else {
                (spec.alpha.get(i).copied().unwrap_or(0.0), spec.beta.get(i).copied().unwrap_or(0.0))
            }
        })
        .unzip();
    TildeCoefficients { alpha_tilde, beta_tilde }
}

/// The nondegeneracy polynomial for one ordered triple.
///
/// This is twice the signed area of the triangle with vertices
/// `(β̃_i, α̃_i)`, `(β̃_j, α̃_j)`, `(β̃_s, α̃_s)`.
pub fn condition_ab(tilde: &TildeCoefficients, i: usize, j: usize, s: usize) -> f64 {
    let (a, b) = (&tilde.alpha_tilde, &tilde.beta_tilde);
    (b[i] - b[j]) * (a[j] - a[s]) - (b[j] - b[s]) * (a[i] - a[j])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NondegeneracyValue {
    /// One-based `(i, j, s)` with `i ∈ G1`, `j ∈ G2`, `s ∈ G3`.
    pub triple: [usize; 3],
    pub value: f64,
    /// The same polynomial with `j` and `s` exchanged (the reversed cycle).
    /// It always equals `-value`; reported for the mirrored orientation.
    pub reversed_value: f64,
    /// `α̃_i = α̃_j = 0`: the triple is not constrained.
    pub exempt: bool,
    pub degenerate: bool,
}

/// Evaluates the nondegeneracy polynomial on every admissible triple.
pub fn check_nondegeneracy(tilde: &TildeCoefficients, spec: &SystemSpec) -> Vec<NondegeneracyValue> {
    let threshold = DEGENERACY_TOLERANCE * tilde.scale();
    let mut out = Vec::new();
    for i in spec.group_range(Group::First) {
        for j in spec.group_range(Group::Second) {
            for s in spec.group_range(Group::Third) {
                let value = condition_ab(tilde, i, j, s);
                let exempt = tilde.alpha_tilde[i] == 0.0 && tilde.alpha_tilde[j] == 0.0;
                out.push(NondegeneracyValue {
                    triple: [i + 1, j + 1, s + 1],
                    value,
                    reversed_value: condition_ab(tilde, i, s, j),
                    exempt,
                    degenerate: !exempt && value.abs() <= threshold,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
    pub nondegeneracy_values: Vec<NondegeneracyValue>,
}

impl ValidationReport {
    pub fn has_rule(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    /// Violations other than degeneracy and numerical periodicity, i.e. the
    /// ones that make the operators undefined.
    pub fn structural_violations(&self) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(|v| v.rule != "nondegeneracy" && v.rule != "periodicity")
    }
}

struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, rule: &str, detail: impl Into<String>) {
        self.0.push(Violation { rule: rule.to_string(), detail: detail.into() });
    }
}

/// Structural rules only; no nondegeneracy or periodicity checks.
fn structural_checks(spec: &SystemSpec, v: &mut Collector) {
    let (n, k, l) = (spec.n, spec.k, spec.l);
    if n < 3 {
        v.push("dims", format!("n ≥ 3 required, got n = {n}"));
    }
    if !(2 <= k && k < n) {
        v.push("dims", format!("2 ≤ k < n required, got k = {k}, n = {n}"));
    }
    if !(1 <= l && l < k) {
        v.push("dims", format!("1 ≤ l ≤ k−1 required, got l = {l}, k = {k}"));
    }
    if !v.0.is_empty() {
        return;
    }

    if !(spec.period_y.is_finite() && spec.period_y > 0.0) {
        v.push("periods", format!("period_y must be positive, got {}", spec.period_y));
    }
    if !(spec.period_t.is_finite() && spec.period_t > 0.0) {
        v.push("periods", format!("period_t must be positive, got {}", spec.period_t));
    }

    for (name, len) in [("alpha", spec.alpha.len()), ("beta", spec.beta.len()), ("gamma", spec.gamma.len())] {
        if len != n {
            v.push("shape", format!("{name} has {len} entries, expected {n}"));
        }
    }
    if spec.alpha.iter().chain(&spec.beta).any(|s| !s.is_finite()) {
        v.push("slopes", "slopes must be finite");
    }
    let b_ok = spec.b.len() == n && spec.b.iter().all(|r| r.len() == n);
    if !b_ok {
        v.push("shape", format!("b must be {n}×{n}"));
    }

    for (name, block, size) in [("a1", &spec.a1, l), ("a2", &spec.a2, k - l), ("a3", &spec.a3, n - k)] {
        match linalg::to_matrix(block) {
            Some(m) if m.nrows() == size => {
                if m.iter().any(|x| !x.is_finite()) {
                    v.push("shape", format!("{name} has non-finite entries"));
                    continue;
                }
                let det = linalg::determinant(&m);
                if det.abs() <= DET_TOLERANCE {
                    v.push(&format!("det_{name}"), format!("det({name})=0 (|det| = {:e})", det.abs()));
                }
            }
            _ => v.push("shape", format!("{name} must be {size}×{size}")),
        }
    }

    if b_ok {
        for i in 0..n {
            for j in 0..n {
                if !spec.pattern_allows(i, j) && !spec.b[i][j].is_literal_zero() {
                    v.push(
                        "pattern",
                        format!("b[{}][{}] = `{}` lies outside the {:?} block pattern", i + 1, j + 1, spec.b[i][j], spec.b_orientation),
                    );
                }
            }
        }
    }
}

/// Rule ids: `dims`, `periods`, `shape`, `slopes`, `det_a1`, `det_a2`,
/// `det_a3`, `pattern`, `periodicity`, `nondegeneracy`.
pub fn validate_spec(spec: &SystemSpec) -> ValidationReport {
    let mut v = Collector(Vec::new());
    structural_checks(spec, &mut v);
    if !v.0.is_empty() {
        return ValidationReport { ok: false, violations: v.0, nondegeneracy_values: Vec::new() };
    }

    let periodic = |e: &Expr| {
        e.is_literal_zero()
            || check_periodicity(e, spec.period_y, spec.period_t, PERIODICITY_SAMPLES, PERIODICITY_TOLERANCE)
                .unwrap_or(false)
    };
    for (i, g) in spec.gamma.iter().enumerate() {
        if !periodic(g) {
            v.push("periodicity", format!("gamma[{}] = `{g}` is not (Y, T)-periodic", i + 1));
        }
    }
    for (i, row) in spec.b.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            if !periodic(e) {
                v.push("periodicity", format!("b[{}][{}] = `{e}` is not (Y, T)-periodic", i + 1, j + 1));
            }
        }
    }

    let tilde = compute_tilde(spec);
    let values = check_nondegeneracy(&tilde, spec);
    for nv in values.iter().filter(|nv| nv.degenerate) {
        let [i, j, s] = nv.triple;
        v.push("nondegeneracy", format!("triple ({i},{j},{s}) is degenerate: value {:e}", nv.value));
    }
    ValidationReport { ok: v.0.is_empty(), violations: v.0, nondegeneracy_values: values }
}

/// Structural violations only (what operator construction requires).
pub fn structural_violations(spec: &SystemSpec) -> Vec<Violation> {
    let mut v = Collector(Vec::new());
    structural_checks(spec, &mut v);
    v.0
}
