//! A structurally valid system with its coefficients prepared for the
//! operator kernels.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::expr::{EvalError, Expr, Var};
use crate::linalg;
use crate::model::{self, Group, SystemSpec, DET_TOLERANCE};

/// A coefficient with its constant cases split out of the expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Coef {
    Zero,
    Const(f64),
    Expr(Expr),
}

impl Coef {
    pub fn new(e: &Expr) -> Self {
        if e.is_literal_zero() {
            Coef::Zero
        } else if let Some(v) = e.constant_value() {
            Coef::Const(v)
        } else {
            Coef::Expr(e.clone())
        }
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64, t: f64) -> Result<f64, EvalError> {
        match self {
            Coef::Zero => Ok(0.0),
            Coef::Const(v) => Ok(*v),
            Coef::Expr(e) => e.eval(x, y, t),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Coef::Zero)
    }

    /// Independent of `y` and `t`.
    pub fn is_transversally_constant(&self) -> bool {
        match self {
            Coef::Expr(e) => !e.uses_var(Var::Y) && !e.uses_var(Var::T),
            _ => true,
        }
    }
}

/// Determinants and adjugates of the diagonal blocks of `A`, plus the
/// combined block `A₀ = diag(A₁, A₂)` acting on the first `k` components.
#[derive(Debug, Clone)]
pub struct AdjugateCache {
    pub det1: f64,
    pub det2: f64,
    pub det3: f64,
    pub adj1: DMatrix<f64>,
    pub adj2: DMatrix<f64>,
    pub adj3: DMatrix<f64>,
    pub det0: f64,
    pub adj0: DMatrix<f64>,
}

fn checked_block(name: &'static str, m: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    let det = linalg::determinant(m);
    if !(det.abs() > DET_TOLERANCE) {
        return Err(Error::SingularBlock { block: name, det });
    }
    let adj = linalg::adjugate(m);
    let size = m.nrows();
    let residual = (m * &adj - DMatrix::<f64>::identity(size, size) * det).amax();
    let scale = (m.amax() * adj.amax() * size as f64).max(1.0);
    if residual > 1e-12 * scale {
        return Err(Error::SingularBlock { block: name, det });
    }
    Ok((det, adj))
}

impl AdjugateCache {
    pub fn new(a1: &DMatrix<f64>, a2: &DMatrix<f64>, a3: &DMatrix<f64>) -> Result<Self> {
        let (det1, adj1) = checked_block("a1", a1)?;
        let (det2, adj2) = checked_block("a2", a2)?;
        let (det3, adj3) = checked_block("a3", a3)?;
        let (det0, adj0) = checked_block("a0", &linalg::block_diag(&[a1, a2]))?;
        Ok(AdjugateCache { det1, det2, det3, adj1, adj2, adj3, det0, adj0 })
    }

    /// `A⁻¹` assembled from the per-block inverses.
    pub fn inverse(&self) -> DMatrix<f64> {
        linalg::block_diag(&[&(&self.adj1 / self.det1), &(&self.adj2 / self.det2), &(&self.adj3 / self.det3)])
    }

    /// `A₀⁻¹ v` through the combined adjugate, for the first `k` components.
    pub fn apply_a0_inverse(&self, v: &[f64]) -> Vec<f64> {
        let k = self.adj0.nrows();
        (0..k).map(|i| (0..k).map(|j| self.adj0[(i, j)] * v[j]).sum::<f64>() / self.det0).collect()
    }
}

#[derive(Debug, Clone)]
pub struct System {
    spec: SystemSpec,
    pub(crate) gamma: Vec<Coef>,
    pub(crate) b: Vec<Vec<Coef>>,
    /// Nonzero `b_ij` per row.
    pub(crate) b_rows: Vec<Vec<(usize, Coef)>>,
    pub(crate) a: DMatrix<f64>,
    pub(crate) a_inv: DMatrix<f64>,
    acache: AdjugateCache,
}

impl System {
    /// Requires the structural rules to hold; nondegeneracy and periodicity
    /// are reported by [`model::validate_spec`] but not enforced here.
    pub fn new(spec: SystemSpec) -> Result<Self> {
        let violations = model::structural_violations(&spec);
        if !violations.is_empty() {
            return Err(Error::InvalidSpec(
                violations.into_iter().map(|v| format!("{}: {}", v.rule, v.detail)).collect(),
            ));
        }
        let block = |rows: &[Vec<f64>]| linalg::to_matrix(rows).expect("shape checked");
        let (a1, a2, a3) = (block(&spec.a1), block(&spec.a2), block(&spec.a3));
        let acache = AdjugateCache::new(&a1, &a2, &a3)?;
        let a = linalg::block_diag(&[&a1, &a2, &a3]);
        let a_inv = acache.inverse();
        let gamma = spec.gamma.iter().map(Coef::new).collect();
        let b: Vec<Vec<Coef>> = spec.b.iter().map(|row| row.iter().map(Coef::new).collect()).collect();
        let b_rows = b
            .iter()
            .map(|row| row.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(j, c)| (j, c.clone())).collect())
            .collect();
        Ok(System { spec, gamma, b, b_rows, a, a_inv, acache })
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn k(&self) -> usize {
        self.spec.k
    }

    pub fn adjugates(&self) -> &AdjugateCache {
        &self.acache
    }

    pub fn a_inverse(&self) -> &DMatrix<f64> {
        &self.a_inv
    }

    pub fn alpha(&self, i: usize) -> f64 {
        self.spec.alpha[i]
    }

    pub fn beta(&self, i: usize) -> f64 {
        self.spec.beta[i]
    }

    /// Components sharing the diagonal block of component `i`.
    pub fn block_of(&self, i: usize) -> std::ops::Range<usize> {
        self.spec.group_range(self.spec.group_of(i))
    }

    pub fn group_range(&self, g: Group) -> std::ops::Range<usize> {
        self.spec.group_range(g)
    }

    /// Rows `i < k` carry their boundary condition at `x = 0`.
    pub fn is_left_row(&self, i: usize) -> bool {
        i < self.spec.k
    }

    pub fn b_is_zero(&self) -> bool {
        self.b_rows.iter().all(Vec::is_empty)
    }

    /// `γ` and `B` do not depend on `y` or `t`, so the discrete operators
    /// commute with grid translations in those directions.
    pub fn is_translation_invariant(&self) -> bool {
        self.gamma.iter().chain(self.b.iter().flatten()).all(Coef::is_transversally_constant)
    }

    /// Same system with every `b_ij` multiplied by `factor`.
    pub fn with_scaled_b(&self, factor: f64) -> Result<System> {
        let mut spec = self.spec.clone();
        for row in spec.b.iter_mut() {
            for e in row.iter_mut() {
                if !e.is_literal_zero() {
                    *e = Expr::Binary(crate::expr::BinOp::Mul, Box::new(Expr::Num(factor)), Box::new(e.clone()));
                }
            }
        }
        System::new(spec)
    }

    pub fn max_abs_alpha(&self) -> f64 {
        self.spec.alpha.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_beta(&self) -> f64 {
        self.spec.beta.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn coef_classification() {
        assert_eq!(Coef::new(&parse("0").unwrap()), Coef::Zero);
        assert_eq!(Coef::new(&parse("2*pi").unwrap()), Coef::Const(2.0 * std::f64::consts::PI));
        assert!(matches!(Coef::new(&parse("x").unwrap()), Coef::Expr(_)));
        assert!(Coef::new(&parse("x*2").unwrap()).is_transversally_constant());
        assert!(!Coef::new(&parse("sin(y)").unwrap()).is_transversally_constant());
    }

    #[test]
    fn rejects_invalid() {
        let err = System::new(SystemSpec::identity(2, 1, 1)).unwrap_err();
        assert!(matches!(err, Error::InvalidSpec(ref v) if v[0].starts_with("dims")));
    }

    #[test]
    fn a0_form_matches_block_inverses() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut spec = SystemSpec::identity(6, 4, 1);
        spec.a1 = vec![vec![2.5]];
        spec.a2 = vec![vec![1.0, 2.0, 0.5], vec![-1.0, 3.0, 0.0], vec![0.2, 0.1, 1.7]];
        spec.a3 = vec![vec![0.0, 1.0], vec![-2.0, 0.3]];
        let sys = System::new(spec).unwrap();
        let inv = sys.a_inverse();
        for _ in 0..20 {
            let v: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let via_a0 = sys.adjugates().apply_a0_inverse(&v);
            for i in 0..4 {
                let direct: f64 = (0..4).map(|j| inv[(i, j)] * v[j]).sum();
                assert!((direct - via_a0[i]).abs() < 1e-12);
            }
        }
        let prod = &sys.a * inv;
        assert!((prod - DMatrix::<f64>::identity(6, 6)).amax() < 1e-12);
    }
}
