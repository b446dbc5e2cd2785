//! Vector-valued functions sampled on a uniform grid over
//! `[0,1] × [0,Y) × [0,T)`, periodic in `y` and `t`.
//!
//! The `x` axis stores both endpoints (`nx + 1` nodes) because the boundary
//! conditions live there; `y` and `t` are half-open so the periodic seam is
//! not duplicated.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{EvalError, Expr};

/// Slack allowed on `x` outside `[0, 1]` before it is a domain error.
pub const X_ROUNDOFF: f64 = 1e-12;
const SNAP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub period_y: f64,
    pub period_t: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, nt: usize, period_y: f64, period_t: f64) -> Result<Self> {
        if nx < 4 || ny < 4 || nt < 4 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 4 cells per axis, got {nx}×{ny}×{nt}"
            )));
        }
        if !(period_y > 0.0 && period_t > 0.0 && period_y.is_finite() && period_t.is_finite()) {
            return Err(Error::InvalidArgument("periods must be positive".into()));
        }
        Ok(Grid { nx, ny, nt, period_y, period_t })
    }

    pub fn x(&self, ix: usize) -> f64 {
        ix as f64 / self.nx as f64
    }

    pub fn y(&self, iy: usize) -> f64 {
        iy as f64 * self.period_y / self.ny as f64
    }

    pub fn t(&self, it: usize) -> f64 {
        it as f64 * self.period_t / self.nt as f64
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.period_y / self.ny as f64
    }

    pub fn dt(&self) -> f64 {
        self.period_t / self.nt as f64
    }

    /// Nodes per component.
    pub fn nodes(&self) -> usize {
        (self.nx + 1) * self.ny * self.nt
    }

    /// Nodes in one `x = const` plane.
    pub fn plane(&self) -> usize {
        self.ny * self.nt
    }

    pub fn node_index(&self, ix: usize, iy: usize, it: usize) -> usize {
        (ix * self.ny + iy) * self.nt + it
    }

    /// Inverse of [`Grid::node_index`].
    pub fn node_coords(&self, node: usize) -> (usize, usize, usize) {
        let it = node % self.nt;
        let rest = node / self.nt;
        (rest / self.ny, rest % self.ny, it)
    }

    pub fn point(&self, node: usize) -> [f64; 3] {
        let (ix, iy, it) = self.node_coords(node);
        [self.x(ix), self.y(iy), self.t(it)]
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.nt == other.nt
            && self.period_y == other.period_y
            && self.period_t == other.period_t
    }
}

/// Anything that can be evaluated at an arbitrary point of the domain.
pub trait Field: Sync {
    fn components(&self) -> usize;

    fn value(&self, c: usize, x: f64, y: f64, t: f64) -> Result<f64>;

    /// True when component `c` is known to vanish identically.
    fn is_zero_component(&self, _c: usize) -> bool {
        false
    }
}

/// Analytic field given by expressions, one per component.
#[derive(Debug, Clone)]
pub struct ExprField<'a> {
    pub exprs: &'a [Expr],
}

impl<'a> ExprField<'a> {
    pub fn new(exprs: &'a [Expr]) -> Self {
        ExprField { exprs }
    }
}

impl Field for ExprField<'_> {
    fn components(&self) -> usize {
        self.exprs.len()
    }

    fn value(&self, c: usize, x: f64, y: f64, t: f64) -> Result<f64> {
        Ok(self.exprs[c].eval(x, y, t)?)
    }

    fn is_zero_component(&self, c: usize) -> bool {
        self.exprs[c].is_literal_zero()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    m: usize,
    values: Vec<f64>,
}

/// Cell lookup along a periodic axis: lower index, upper index, fraction.
#[inline]
fn periodic_cell(v: f64, period: f64, n: usize) -> (usize, usize, f64) {
    let s = v.rem_euclid(period) / period * n as f64;
    let r = s.round();
    let s = if (s - r).abs() < SNAP { r } else { s };
    let i0 = s.floor();
    let frac = s - i0;
    let i0 = (i0 as usize) % n;
    (i0, (i0 + 1) % n, frac)
}

impl GridFunction {
    pub fn zeros(grid: Grid, m: usize) -> Self {
        GridFunction { grid, m, values: vec![0.0; m * grid.nodes()] }
    }

    pub fn from_values(grid: Grid, m: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != m * grid.nodes() {
            return Err(Error::Shape(format!(
                "{} values for {m} components on {} nodes",
                values.len(),
                grid.nodes()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("grid function values must be finite".into()));
        }
        Ok(GridFunction { grid, m, values })
    }

    /// Builds a function node by node; `f` receives `(component, ix, iy, it)`.
    pub fn from_fn(grid: Grid, m: usize, f: impl Fn(usize, usize, usize, usize) -> f64 + Sync) -> Self {
        let nodes = grid.nodes();
        let values = (0..m * nodes)
            .into_par_iter()
            .map(|idx| {
                let (ix, iy, it) = grid.node_coords(idx % nodes);
                f(idx / nodes, ix, iy, it)
            })
            .collect();
        GridFunction { grid, m, values }
    }

    /// Unit impulse at one node.
    pub fn impulse(grid: Grid, m: usize, c: usize, ix: usize, iy: usize, it: usize) -> Self {
        let mut g = Self::zeros(grid, m);
        *g.get_mut(c, ix, iy, it) = 1.0;
        g
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.grid.nodes();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.grid.nodes();
        &mut self.values[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, ix: usize, iy: usize, it: usize) -> f64 {
        self.values[c * self.grid.nodes() + self.grid.node_index(ix, iy, it)]
    }

    #[inline]
    pub fn get_mut(&mut self, c: usize, ix: usize, iy: usize, it: usize) -> &mut f64 {
        let idx = c * self.grid.nodes() + self.grid.node_index(ix, iy, it);
        &mut self.values[idx]
    }

    pub fn component_is_zero(&self, c: usize) -> bool {
        self.component(c).iter().all(|v| *v == 0.0)
    }

    /// Trilinear interpolation of one component.
    pub fn interpolate_component(&self, c: usize, x: f64, y: f64, t: f64) -> Result<f64> {
        if !(-X_ROUNDOFF..=1.0 + X_ROUNDOFF).contains(&x) {
            return Err(Error::Domain { x });
        }
        let g = &self.grid;
        let sx = x.clamp(0.0, 1.0) * g.nx as f64;
        let r = sx.round();
        let sx = if (sx - r).abs() < SNAP { r } else { sx };
        let ix0 = sx.floor() as usize;
        let (iy0, iy1, fy) = periodic_cell(y, g.period_y, g.ny);
        let (it0, it1, ft) = periodic_cell(t, g.period_t, g.nt);

        let data = self.component(c);
        let at = |ix: usize, iy: usize, it: usize| data[g.node_index(ix, iy, it)];
        let lerp = |a: f64, b: f64, f: f64| if f == 0.0 { a } else { a + f * (b - a) };
        let plane = |ix: usize| {
            let lo = lerp(at(ix, iy0, it0), at(ix, iy0, it1), ft);
            let hi = lerp(at(ix, iy1, it0), at(ix, iy1, it1), ft);
            lerp(lo, hi, fy)
        };
        let fx = sx - ix0 as f64;
        if fx == 0.0 {
            Ok(plane(ix0))
        } else {
            Ok(lerp(plane(ix0), plane(ix0 + 1), fx))
        }
    }

    /// All components at one point.
    pub fn interpolate(&self, x: f64, y: f64, t: f64) -> Result<Vec<f64>> {
        (0..self.m).map(|c| self.interpolate_component(c, x, y, t)).collect()
    }

    /// Maximum over components and nodes of the absolute value.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Sum over components of the per-component maxima.
    pub fn sup_norm_summed(&self) -> f64 {
        (0..self.m).map(|c| self.component(c).iter().fold(0.0f64, |m, v| m.max(v.abs()))).sum()
    }

    /// `max |gf(p + h) − gf(p)|` over components and nodes `p` whose shifted
    /// `x` stays inside `[0, 1]`; returns the norm and the number of skipped
    /// nodes (per component).
    pub fn shift_diff_norm(&self, h: [f64; 3]) -> (f64, usize) {
        let g = self.grid;
        let results: Vec<(f64, usize)> = (0..g.nodes())
            .into_par_iter()
            .map(|node| {
                let [x, y, t] = g.point(node);
                let xs = x + h[0];
                if !(-X_ROUNDOFF..=1.0 + X_ROUNDOFF).contains(&xs) {
                    return (0.0, 1);
                }
                let (ix, iy, it) = g.node_coords(node);
                let mut worst = 0.0f64;
                for c in 0..self.m {
                    // in-domain by the check above
                    let shifted = self.interpolate_component(c, xs, y + h[1], t + h[2]).unwrap_or(0.0);
                    worst = worst.max((shifted - self.get(c, ix, iy, it)).abs());
                }
                (worst, 0)
            })
            .collect();
        results.iter().fold((0.0f64, 0usize), |(m, s), (v, k)| (m.max(*v), s + k))
    }

    fn check_same(&self, other: &GridFunction) -> Result<()> {
        if self.m != other.m || !self.grid.same_shape(&other.grid) {
            return Err(Error::Shape("grid functions differ in grid or component count".into()));
        }
        Ok(())
    }

    /// `a·self + b·other`.
    pub fn lincomb(&self, a: f64, other: &GridFunction, b: f64) -> Result<GridFunction> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(u, v)| a * u + b * v).collect();
        Ok(GridFunction { grid: self.grid, m: self.m, values })
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.lincomb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.lincomb(1.0, other, -1.0)
    }

    pub fn scale(&self, a: f64) -> GridFunction {
        GridFunction { grid: self.grid, m: self.m, values: self.values.iter().map(|v| a * v).collect() }
    }

    /// Writes `component,ix,iy,it,x,y,t,value` rows in storage order.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for c in 0..self.m {
            for node in 0..self.grid.nodes() {
                let (ix, iy, it) = self.grid.node_coords(node);
                let [x, y, t] = self.grid.point(node);
                wr.serialize(CsvRow { component: c, ix, iy, it, x, y, t, value: self.get(c, ix, iy, it) })?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the format produced by [`GridFunction::write_csv`].
    pub fn read_csv<R: Read>(grid: Grid, m: usize, r: R) -> Result<GridFunction> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
            return Err(Error::Shape(format!("unexpected csv header {headers:?}")));
        }
        let mut g = GridFunction::zeros(grid, m);
        let mut seen = 0usize;
        for row in rd.deserialize() {
            let row: CsvRow = row?;
            if row.component >= m || row.ix > grid.nx || row.iy >= grid.ny || row.it >= grid.nt {
                return Err(Error::Shape(format!("csv row out of range: {row:?}")));
            }
            *g.get_mut(row.component, row.ix, row.iy, row.it) = row.value;
            seen += 1;
        }
        if seen != m * grid.nodes() {
            return Err(Error::Shape(format!("csv has {seen} rows, expected {}", m * grid.nodes())));
        }
        Ok(g)
    }
}

pub const CSV_HEADER: [&str; 8] = ["component", "ix", "iy", "it", "x", "y", "t", "value"];

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    component: usize,
    ix: usize,
    iy: usize,
    it: usize,
    x: f64,
    y: f64,
    t: f64,
    value: f64,
}

impl Field for GridFunction {
    fn components(&self) -> usize {
        self.m
    }

    fn value(&self, c: usize, x: f64, y: f64, t: f64) -> Result<f64> {
        self.interpolate_component(c, x, y, t)
    }

    fn is_zero_component(&self, c: usize) -> bool {
        self.component_is_zero(c)
    }
}

/// Samples expressions at every node.
pub fn sample(exprs: &[Expr], grid: &Grid) -> Result<GridFunction> {
    let nodes = grid.nodes();
    let m = exprs.len();
    let values: std::result::Result<Vec<f64>, Error> = (0..m * nodes)
        .into_par_iter()
        .map(|idx| {
            let c = idx / nodes;
            let (ix, iy, it) = grid.node_coords(idx % nodes);
            exprs[c]
                .eval(grid.x(ix), grid.y(iy), grid.t(it))
                .map_err(|e: EvalError| Error::at_node(e, c, ix, iy, it))
        })
        .collect();
    Ok(GridFunction { grid: *grid, m, values: values? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn exprs(src: &[&str]) -> Vec<Expr> {
        src.iter().map(|s| parse(s).unwrap()).collect()
    }

    fn grid(nx: usize, ny: usize, nt: usize) -> Grid {
        Grid::new(nx, ny, nt, 1.0, 1.0).unwrap()
    }

    #[test]
    fn zero_field() {
        let g = sample(&exprs(&["0", "0"]), &grid(4, 4, 4)).unwrap();
        assert_eq!(g.m(), 2);
        assert!(g.values().iter().all(|v| *v == 0.0));
        assert_eq!(g.sup_norm(), 0.0);
    }

    #[test]
    fn x_nodes() {
        let g = sample(&exprs(&["x"]), &grid(4, 4, 4)).unwrap();
        let along: Vec<f64> = (0..=4).map(|ix| g.get(0, ix, 2, 1)).collect();
        assert_eq!(along, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn sine_quarter_periods() {
        let g = sample(&exprs(&["sin(2*pi*y)"]), &grid(4, 4, 4)).unwrap();
        let want = [0.0, 1.0, 0.0, -1.0];
        for (iy, w) in want.iter().enumerate() {
            assert!((g.get(0, 1, iy, 0) - w).abs() < 1e-15);
        }
        assert!((g.sup_norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn interpolation_reproduces_nodes_exactly() {
        let gr = Grid::new(6, 5, 7, 0.7, 1.3).unwrap();
        let g = sample(&exprs(&["sin(2*pi*y/0.7)*x + cos(2*pi*t/1.3)"]), &gr).unwrap();
        for node in 0..gr.nodes() {
            let [x, y, t] = gr.point(node);
            let (ix, iy, it) = gr.node_coords(node);
            assert_eq!(g.interpolate_component(0, x, y, t).unwrap(), g.get(0, ix, iy, it));
        }
    }

    #[test]
    fn constant_field_with_wrap() {
        let gr = Grid::new(4, 4, 4, 2.0, 1.0).unwrap();
        let g = sample(&exprs(&["3.5"]), &gr).unwrap();
        assert_eq!(g.interpolate_component(0, 0.37, -3.7 * 2.0, 11.2).unwrap(), 3.5);
    }

    #[test]
    fn cell_midpoint_is_corner_mean() {
        let gr = grid(4, 8, 4);
        let g = sample(&exprs(&["x + 2*y + 3*t*x"]), &gr).unwrap();
        let (x, y, t) = (gr.x(1) + 0.5 * gr.dx(), gr.y(3) + 0.5 * gr.dy(), gr.t(2) + 0.5 * gr.dt());
        let mut mean = 0.0;
        for dx in 0..2 {
            for dy in 0..2 {
                for dt in 0..2 {
                    mean += g.get(0, 1 + dx, 3 + dy, 2 + dt);
                }
            }
        }
        mean /= 8.0;
        assert!((g.interpolate_component(0, x, y, t).unwrap() - mean).abs() < 1e-14);
    }

    #[test]
    fn x_domain() {
        let g = GridFunction::zeros(grid(4, 4, 4), 1);
        assert!(g.interpolate_component(0, 1.0 + 1e-13, 0.0, 0.0).is_ok());
        assert!(g.interpolate_component(0, -1e-13, 0.0, 0.0).is_ok());
        assert!(matches!(g.interpolate_component(0, 1.001, 0.0, 0.0), Err(Error::Domain { .. })));
        assert!(matches!(g.interpolate_component(0, -0.5, 0.0, 0.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn sup_norm_conventions() {
        let g = sample(&exprs(&["2*sin(2*pi*y)", "5*x"]), &grid(4, 4, 4)).unwrap();
        assert!((g.sup_norm() - 5.0).abs() < 1e-15);
        assert!((g.sup_norm_summed() - 7.0).abs() < 1e-14);
    }

    #[test]
    fn shift_differences() {
        let gr = Grid::new(4, 8, 4, 2.0, 1.0).unwrap();
        let c = sample(&exprs(&["1.5"]), &gr).unwrap();
        assert_eq!(c.shift_diff_norm([0.1, 0.3, -0.2]).0, 0.0);

        let s = sample(&exprs(&["sin(2*pi*y/2)"]), &gr).unwrap();
        let (v, skipped) = s.shift_diff_norm([0.0, 1.0, 0.0]);
        assert!((v - 2.0).abs() < 1e-14);
        assert_eq!(skipped, 0);
        assert_eq!(s.shift_diff_norm([0.0, 0.0, 0.0]).0, 0.0);

        // x shifts skip the last planes
        let (_, skipped) = s.shift_diff_norm([0.5, 0.0, 0.0]);
        assert_eq!(skipped, 2 * gr.plane());
    }

    #[test]
    fn csv_round_trip() {
        let gr = Grid::new(4, 4, 5, 1.0, 0.5).unwrap();
        let g = sample(&exprs(&["sin(2*pi*y)*x", "cos(4*pi*t) + 1/3"]), &gr).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("component,ix,iy,it,x,y,t,value\n"));
        let back = GridFunction::read_csv(gr, 2, buf.as_slice()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn interpolation_is_second_order() {
        let golden = exprs(&["sin(2*pi*y)*cos(2*pi*t)*exp(x)"]);
        let probes: Vec<[f64; 3]> = (1..200)
            .map(|i| {
                let f = i as f64;
                [(f * 0.618034) % 1.0, (f * 0.754878) % 1.0, (f * 0.569840) % 1.0]
            })
            .collect();
        let err = |n: usize| {
            let g = sample(&golden, &grid(n, n, n)).unwrap();
            probes
                .iter()
                .map(|p| {
                    let exact = golden[0].eval(p[0], p[1], p[2]).unwrap();
                    (g.interpolate_component(0, p[0], p[1], p[2]).unwrap() - exact).abs()
                })
                .fold(0.0f64, f64::max)
        };
        let ratio = err(16) / err(32);
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn random_field(seed: u64) -> GridFunction {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let gr = Grid::new(5, 6, 4, 1.5, 0.8).unwrap();
            let values = (0..2 * gr.nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            GridFunction::from_values(gr, 2, values).unwrap()
        }

        proptest! {
            #[test]
            fn periodic_wrap(seed in 0u64..1000, x in 0.0f64..=1.0, y in -5.0f64..5.0, t in -5.0f64..5.0) {
                let g = random_field(seed);
                for c in 0..2 {
                    let a = g.interpolate_component(c, x, y, t).unwrap();
                    let b = g.interpolate_component(c, x, y + 1.5, t + 0.8).unwrap();
                    prop_assert!((a - b).abs() <= 1e-13);
                }
            }

            #[test]
            fn triangle_inequality(s1 in 0u64..1000, s2 in 0u64..1000) {
                let (a, b) = (random_field(s1), random_field(s2));
                prop_assert!(a.add(&b).unwrap().sup_norm() <= a.sup_norm() + b.sup_norm() + 1e-15);
            }

            #[test]
            fn shift_bounded_by_twice_sup(seed in 0u64..1000, hx in -0.5f64..0.5, hy in -3.0f64..3.0, ht in -3.0f64..3.0) {
                let g = random_field(seed);
                prop_assert!(g.shift_diff_norm([hx, hy, ht]).0 <= 2.0 * g.sup_norm() + 1e-15);
            }
        }
    }
}
