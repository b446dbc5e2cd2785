use charfred_core::characteristics::apply_c_inverse;
use charfred_core::expr::parse;
use charfred_core::fredholm::{apply_k, apply_k_cubed_fused, finite_section_kernel_check, random_matrix, solve_neumann};
use charfred_core::grid::{sample, ExprField};
use charfred_core::{Expr, Grid, GridFunction, System, SystemSpec};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn system() -> System {
    let mut spec = SystemSpec::identity(3, 2, 1);
    spec.alpha = vec![0.5, -0.25, 0.3];
    spec.beta = vec![0.25, 0.5, -0.4];
    spec.gamma = vec![parse("0.2").unwrap(), parse("x/10").unwrap(), Expr::zero()];
    spec.b[0][2] = parse("0.25 + x/8").unwrap();
    spec.b[1][0] = parse("0.2").unwrap();
    spec.b[2][1] = parse("-0.15*x").unwrap();
    System::new(spec).unwrap()
}

fn rhs(g: &Grid) -> GridFunction {
    let e: Vec<Expr> = ["sin(2*pi*y)", "cos(2*pi*(y - t))", "x*sin(2*pi*t)"].iter().map(|s| parse(s).unwrap()).collect();
    sample(&e, g).unwrap()
}

fn operators(c: &mut Criterion) {
    let sys = system();
    let mut group = c.benchmark_group("operators");
    for n in [8usize, 16] {
        let g = Grid::new(n, n, n, 1.0, 1.0).unwrap();
        let f = rhs(&g);
        group.bench_with_input(BenchmarkId::new("c_inverse", n), &f, |b, f| b.iter(|| apply_c_inverse(&sys, f).unwrap()));
        group.bench_with_input(BenchmarkId::new("k", n), &f, |b, f| b.iter(|| apply_k(&sys, f).unwrap()));
        group.bench_with_input(BenchmarkId::new("neumann", n), &f, |b, f| {
            b.iter(|| solve_neumann(&sys, f, 1e-10, 200).unwrap())
        });
    }
    group.finish();
}

fn fused(c: &mut Criterion) {
    let sys = system();
    let f: Vec<Expr> = ["sin(2*pi*y)", "1", "x"].iter().map(|s| parse(s).unwrap()).collect();
    let probes = [[0.3, 0.2, 0.7], [0.6, 0.9, 0.1]];
    c.bench_function("k_cubed_fused", |b| b.iter(|| apply_k_cubed_fused(&sys, &ExprField::new(&f), &probes).unwrap()));
}

fn finite_section(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let k = random_matrix(&mut rng, 8);
    c.bench_function("kernel_check_8x8_n4", |b| b.iter(|| finite_section_kernel_check(&k, 4)));
}

criterion_group!(benches, operators, fused, finite_section);
criterion_main!(benches);
