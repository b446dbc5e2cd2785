//! Kernel dimensions of `I − K` and `I − Kⁿ` for finite matrices.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Singular values at or below this fraction of the largest one count as
/// kernel directions.
pub const KERNEL_THRESHOLD: f64 = 1e-8;

/// Number of singular values `≤ KERNEL_THRESHOLD · σ_max`.
pub fn kernel_dimension(m: &DMatrix<f64>) -> usize {
    kernel_dimension_scaled(m, 0.0)
}

/// As [`kernel_dimension`] with `σ_max` floored at `scale`.
pub fn kernel_dimension_scaled(m: &DMatrix<f64>, scale: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let cutoff = KERNEL_THRESHOLD * sv.max().max(scale);
    sv.iter().filter(|&&s| s <= cutoff).count()
}

/// `(dim ker(I − K), dim ker(I − Kⁿ))` by singular-value thresholding.
///
/// The threshold is taken relative to `max(σ_max, 1)`: when `Kⁿ = I` up to
/// rounding, `I − Kⁿ` is pure noise and `σ_max` alone would count none of
/// it as kernel.
///
/// Since `I − Kⁿ = (Σ_{i<n} Kⁱ)(I − K)`, the first never exceeds the second
/// in exact arithmetic; the values are reported as measured.
pub fn finite_section_kernel_check(k: &DMatrix<f64>, n: usize) -> (usize, usize) {
    assert!(k.is_square(), "K must be square");
    assert!(n >= 1, "power must be at least 1");
    let dim = k.nrows();
    let id = DMatrix::<f64>::identity(dim, dim);
    let mut kn = k.clone();
    for _ in 1..n {
        kn = &kn * k;
    }
    (kernel_dimension_scaled(&(&id - k), 1.0), kernel_dimension_scaled(&(&id - kn), 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestbedRow {
    pub dim: usize,
    pub power: usize,
    pub kernel_first: usize,
    pub kernel_power: usize,
    pub crafted: bool,
}

impl TestbedRow {
    pub fn holds(&self) -> bool {
        self.kernel_first <= self.kernel_power
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestbedSummary {
    pub seed: u64,
    pub random_cases: usize,
    pub crafted_cases: usize,
    pub rows: Vec<TestbedRow>,
    pub violations: Vec<TestbedRow>,
}

/// Entries uniform in `[−1, 1]`.
pub fn random_matrix(rng: &mut impl Rng, dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..=1.0))
}

/// A matrix with eigenvalue 1 and, for `power > 1`, further eigenvalues on
/// the `power`-th roots of unity, hidden by a random similarity.
pub fn crafted_matrix(rng: &mut impl Rng, dim: usize, power: usize) -> DMatrix<f64> {
    assert!(dim >= 2);
    let mut core = DMatrix::<f64>::zeros(dim, dim);
    let mut i = 0;
    let ones = rng.gen_range(1..=dim.div_ceil(2));
    while i < ones {
        core[(i, i)] = 1.0;
        i += 1;
    }
    if rng.gen_bool(0.5) && i < dim {
        // Jordan block on the eigenvalue 1
        core[(i - 1, i)] = 1.0;
        core[(i, i)] = 1.0;
        i += 1;
    }
    if power % 2 == 0 && i < dim {
        core[(i, i)] = -1.0;
        i += 1;
    }
    if power >= 3 && i + 1 < dim {
        let theta = 2.0 * std::f64::consts::PI / power as f64;
        core[(i, i)] = theta.cos();
        core[(i, i + 1)] = -theta.sin();
        core[(i + 1, i)] = theta.sin();
        core[(i + 1, i + 1)] = theta.cos();
        i += 2;
    }
    while i < dim {
        core[(i, i)] = rng.gen_range(-0.9..0.9);
        i += 1;
    }
    let s = DMatrix::<f64>::identity(dim, dim) + 0.3 * random_matrix(rng, dim);
    match s.clone().try_inverse() {
        Some(inv) => &s * core * inv,
        None => core,
    }
}

/// Kernel inequality over `count` random matrices of size `1..=max_dim` and
/// `crafted` matrices with eigenvalue 1; the crafted list starts with
/// `diag(1, 0.5)` at power 2.
pub fn testbed(count: usize, max_dim: usize, powers: &[usize], crafted: usize, seed: u64) -> TestbedSummary {
    assert!(max_dim >= 2 && !powers.is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(count + crafted);
    for _ in 0..count {
        let dim = rng.gen_range(1..=max_dim);
        let power = powers[rng.gen_range(0..powers.len())];
        let (a, b) = finite_section_kernel_check(&random_matrix(&mut rng, dim), power);
        rows.push(TestbedRow { dim, power, kernel_first: a, kernel_power: b, crafted: false });
    }
    for c in 0..crafted {
        let (k, power) = if c == 0 {
            (DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.5])), 2)
        } else {
            let dim = rng.gen_range(2..=max_dim);
            let power = powers[rng.gen_range(0..powers.len())];
            (crafted_matrix(&mut rng, dim, power), power)
        };
        let (a, b) = finite_section_kernel_check(&k, power);
        rows.push(TestbedRow { dim: k.nrows(), power, kernel_first: a, kernel_power: b, crafted: true });
    }
    let violations = rows.iter().filter(|r| !r.holds()).cloned().collect();
    TestbedSummary { seed, random_cases: count, crafted_cases: crafted, rows, violations }
}
