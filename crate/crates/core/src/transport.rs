//! Solutions of `w_t + v w_x = a w + f` on `[0, 1]` with `w(t, 0) = b(t)`
//! and `w(0, x) = φ(x)`, built from the characteristic formulas.
//!
//! Along a characteristic the state obeys `dW/ds = a W + f`, which is
//! integrated with the exponential trapezoid recursion
//! `W' = e^{ΔA}(W + h f/2) + h f'/2`, `ΔA = h (a + a')/2`.
//!
//! [`solve_point`] evaluates one node exactly: it inverts the flow by
//! bisection and integrates along the recovered curve. [`Sweep`] produces
//! whole grid rows at once by carrying the same recursion on a family of
//! curves (one per grid label, one per jump side, and curves entering
//! from `x = 0` about every `Δx`) and interpolating to the nodes within
//! each region bounded by the separatrix and the jump loci.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::characteristics::{rk4, Characteristics};
use crate::fields::{BoundarySignal, InitialProfile, TransportCoefficients, VelocityField};
use crate::grid::Grid;
use crate::signal::{ScalarProfile, ScalarSignal, SpaceTimeField};
use crate::Result;

/// Offset used to read one-sided limits of the initial data at a jump.
const LIMIT_STEP: f64 = 1e-7;

/// Validated data of the transport problem.
#[derive(Debug, Clone)]
pub struct TransportProblem {
    pub v: VelocityField,
    pub phi: InitialProfile,
    pub b: BoundarySignal,
    pub coeffs: TransportCoefficients,
}

impl TransportProblem {
    pub fn new(v: VelocityField, phi: InitialProfile, b: BoundarySignal, coeffs: TransportCoefficients) -> Self {
        TransportProblem { v, phi, b, coeffs }
    }

    /// `w1`: boundary data only.
    pub fn boundary_part(&self) -> TransportProblem {
        self.with_parts(false, true, false)
    }

    /// `w2`: initial data only.
    pub fn initial_part(&self) -> TransportProblem {
        self.with_parts(true, false, false)
    }

    /// `w3`: source only.
    pub fn source_part(&self) -> TransportProblem {
        self.with_parts(false, false, true)
    }

    // Jump points are kept in every part so all parts share one
    // partition of the domain.
    fn with_parts(&self, phi: bool, b: bool, f: bool) -> TransportProblem {
        let mut out = self.clone();
        if !phi {
            out.phi = self.phi.with_profile(ScalarProfile::zero());
        }
        if !b {
            out.b = self.b.with_signal(ScalarSignal::zero());
        }
        if !f {
            out.coeffs.f = SpaceTimeField::zero();
        }
        out
    }

    /// `φ(ξ−)`, read by linear extrapolation from the left.
    pub fn phi_left(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return self.phi.eval(x);
        }
        let d = LIMIT_STEP.min(0.5 * x);
        2.0 * self.phi.eval(x - d) - self.phi.eval(x - 2.0 * d)
    }

    /// `φ(ξ+)`, read by linear extrapolation from the right.
    pub fn phi_right(&self, x: f64) -> f64 {
        if x >= 1.0 {
            return self.phi.eval(x);
        }
        let d = LIMIT_STEP.min(0.5 * (1.0 - x));
        2.0 * self.phi.eval(x + d) - self.phi.eval(x + 2.0 * d)
    }

    /// Initial value carried by the curve from `x0`, with the left limit
    /// on a jump point.
    fn initial_value(&self, x0: f64) -> f64 {
        match self.phi.jump_points().iter().find(|&&xi| (x0 - xi).abs() <= 1e-9) {
            Some(&xi) => self.phi_left(xi),
            None => self.phi.eval(x0),
        }
    }

    /// Past the outflow, the extension when finite, else frozen at `x = 1`.
    #[inline]
    fn af(&self, t: f64, x: f64) -> (f64, f64) {
        let at = |x: f64| (self.coeffs.a.eval(t, x), self.coeffs.f.eval(t, x));
        if x > 1.0 {
            let (a, f) = at(x);
            if a.is_finite() && f.is_finite() {
                return (a, f);
            }
        }
        at(x.min(1.0))
    }
}

/// One step of the exponential trapezoid recursion.
#[inline]
fn advance(w: f64, h: f64, (a0, f0): (f64, f64), (a1, f1): (f64, f64)) -> f64 {
    let growth = libm::exp(0.5 * h * (a0 + a1));
    growth * (w + 0.5 * h * f0) + 0.5 * h * f1
}

/// Which part of the superposition a field holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Full,
    /// `w1`: response to `b` alone.
    Boundary,
    /// `w2`: response to `φ` alone.
    Initial,
    /// `w3`: response to `f` alone.
    Source,
}

/// What the sampled values represent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quantity {
    /// The transport state `w`.
    State,
    /// A density `ρ = ρs·exp(w)`.
    Density { rho_s: f64 },
}

/// A solution sampled on every node of a grid, row by row in time.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    grid: Grid,
    values: Vec<f64>,
    separatrix: Vec<f64>,
    loci: Vec<Vec<f64>>,
    component: Component,
    quantity: Quantity,
}

impl SolutionField {
    /// Assembles a field from row-major values (`rows × nodes`).
    pub fn from_rows(grid: Grid, values: Vec<f64>, component: Component, quantity: Quantity) -> SolutionField {
        assert_eq!(values.len(), grid.rows() * grid.nodes(), "value count does not match the grid");
        SolutionField {
            grid,
            values,
            separatrix: Vec::new(),
            loci: Vec::new(),
            component,
            quantity,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn component(&self) -> Component {
        self.component
    }

    pub fn quantity(&self) -> Quantity {
        self.quantity
    }

    #[inline]
    pub fn value(&self, k: usize, j: usize) -> f64 {
        self.values[k * self.grid.nodes() + j]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let n = self.grid.nodes();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.grid.nodes())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `r0(t_k)` held at 1 after exit; empty if not recorded.
    pub fn separatrix(&self) -> &[f64] {
        &self.separatrix
    }

    /// `r_i(t_k)` for each jump point, held at 1 after exit.
    pub fn jump_loci(&self) -> &[Vec<f64>] {
        &self.loci
    }

    /// Largest distance from `(t_k, x_j)` to a jump locus is more than
    /// `d`, measured in `x`.
    pub fn away_from_loci(&self, k: usize, x: f64, d: f64) -> bool {
        self.loci.iter().all(|l| (l[k] - x).abs() > d || l[k] >= 1.0)
    }

    /// Maps every value, e.g. `w ↦ ρs·e^w`.
    pub fn map(mut self, quantity: Quantity, f: impl Fn(f64) -> f64) -> SolutionField {
        self.values.iter_mut().for_each(|v| *v = f(*v));
        self.quantity = quantity;
        self
    }

    pub fn max_abs_diff(&self, other: &SolutionField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// `w(t, x)` at one point from the exact characteristic formulas.
pub fn solve_point(problem: &TransportProblem, chars: &Characteristics<'_>, t: f64, x: f64) -> Result<f64> {
    if t <= 0.0 {
        return Ok(problem.initial_value(x));
    }
    let (t0, path, mut w) = if x <= chars.r0(t) {
        let t0 = chars.backtrace_t0(t, x)?;
        (t0, chars.flow(t0, 0.0, t - t0), problem.b.eval(t0))
    } else {
        let x0 = chars.backtrace_x0(t, x)?;
        (0.0, chars.flow(0.0, x0, t), problem.initial_value(x0))
    };
    let mut prev = (0.0, problem.af(t0, path.x0));
    for &(s, xs) in &path.samples[1..] {
        let cur = problem.af(t0 + s, xs);
        w = advance(w, s - prev.0, prev.1, cur);
        prev = (s, cur);
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy)]
struct Particle {
    x: f64,
    w: f64,
    a: f64,
    f: f64,
    region: usize,
}

/// One grid row produced by a [`Sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub t: f64,
    pub values: Vec<f64>,
    /// Separatrix first, then the jump loci, held at 1 after exit.
    pub loci: Vec<f64>,
}

/// Row-by-row characteristic solver; see the module docs.
#[derive(Debug)]
pub struct Sweep<'a> {
    problem: &'a TransportProblem,
    grid: Grid,
    next_row: usize,
    particles: VecDeque<Particle>,
    tracers: Vec<f64>,
    pos: Vec<f64>,
    val: Vec<f64>,
    starts: Vec<usize>,
}

impl<'a> Sweep<'a> {
    pub fn new(problem: &'a TransportProblem, grid: Grid) -> Sweep<'a> {
        let jumps = problem.phi.jump_points();
        let dx = grid.dx();
        let mut particles = VecDeque::with_capacity(2 * grid.nodes() + 8);
        let mut push = |x: f64, w: f64, region: usize| {
            let (a, f) = problem.af(0.0, x);
            particles.push_back(Particle { x, w, a, f, region });
        };
        push(0.0, problem.b.eval(0.0), 0);
        let mut edges = Vec::with_capacity(jumps.len() + 2);
        edges.push(0.0);
        edges.extend_from_slice(jumps);
        edges.push(1.0);
        for (r, pair) in edges.windows(2).enumerate() {
            let (lo, hi) = (pair[0], pair[1]);
            let region = r + 1;
            let left = if r == 0 { problem.phi.eval(lo) } else { problem.phi_right(lo) };
            push(lo, left, region);
            for j in 0..=grid.nx() {
                let x = grid.x(j);
                if x > lo + 0.1 * dx && x < hi - 0.1 * dx {
                    push(x, problem.phi.eval(x), region);
                }
            }
            let right = if region == edges.len() - 1 {
                problem.phi.eval(hi)
            } else {
                problem.phi_left(hi)
            };
            push(hi, right, region);
        }
        let mut tracers = Vec::with_capacity(jumps.len() + 1);
        tracers.push(0.0);
        tracers.extend_from_slice(jumps);
        Sweep {
            problem,
            grid,
            next_row: 0,
            particles,
            tracers,
            pos: Vec::new(),
            val: Vec::new(),
            starts: Vec::new(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Advances every curve from row `k` to row `k + 1`.
    fn step(&mut self, k: usize) {
        let t = self.grid.t(k);
        let h = self.grid.t(k + 1) - t;
        let v = self.problem.v.field();
        for p in self.particles.iter_mut() {
            let x = rk4(v, t, p.x, h);
            let (a, f) = self.problem.af(t + h, x);
            p.w = advance(p.w, h, (p.a, p.f), (a, f));
            *p = Particle { x, a, f, ..*p };
        }
        for r in self.tracers.iter_mut() {
            *r = rk4(v, t, *r, h);
        }
        let t1 = t + h;
        let front = self.particles.front().map(|p| (p.region, p.x));
        if !matches!(front, Some((0, x)) if x < 0.999 * self.grid.dx()) {
            let (a, f) = self.problem.af(t1, 0.0);
            self.particles.push_front(Particle {
                x: 0.0,
                w: self.problem.b.eval(t1),
                a,
                f,
                region: 0,
            });
        }
        self.prune();
    }

    /// Drops curves that can no longer reach a node.
    fn prune(&mut self) {
        let last = self.tracers.iter().filter(|&&r| r < 1.0).count();
        while matches!(self.particles.back(), Some(p) if p.region > last) {
            self.particles.pop_back();
        }
        let beyond = self
            .particles
            .iter()
            .rev()
            .take_while(|p| p.region == last && p.x > 1.0)
            .count();
        for _ in 3..beyond {
            self.particles.pop_back();
        }
    }

    fn row_values(&mut self, k: usize) -> Vec<f64> {
        let grid = self.grid;
        let problem = self.problem;
        if k == 0 {
            return grid.xs().map(|x| problem.initial_value(x)).collect();
        }
        let t = grid.t(k);
        self.pos.clear();
        self.val.clear();
        self.starts.clear();
        let mut regions: Vec<usize> = Vec::with_capacity(self.particles.len() + 1);
        if !matches!(self.particles.front(), Some(p) if p.region == 0 && p.x == 0.0) {
            self.pos.push(0.0);
            self.val.push(problem.b.eval(t));
            regions.push(0);
        }
        for p in &self.particles {
            self.pos.push(p.x);
            self.val.push(p.w);
            regions.push(p.region);
        }
        let n_regions = self.tracers.len() + 1;
        let mut i = 0;
        for r in 0..=n_regions {
            while i < regions.len() && regions[i] < r {
                i += 1;
            }
            self.starts.push(i);
        }
        let loci: Vec<f64> = self.tracers.iter().map(|&r| r.min(1.0)).collect();
        let mut out = Vec::with_capacity(grid.nodes());
        let mut region = 0;
        let mut cursor = 0;
        for j in 0..grid.nodes() {
            let x = grid.x(j);
            while region < loci.len() && loci[region] < x {
                region += 1;
            }
            let (lo, mut hi) = (self.starts[region], self.starts[region + 1]);
            // Curves past x = 1 follow extended coefficients; they only
            // fill a stencil that has too few samples inside the domain.
            let inside = lo + self.pos[lo..hi].partition_point(|&p| p <= 1.0);
            hi = hi.min(inside.max(lo + 4));
            cursor = cursor.clamp(lo, hi - 1);
            while cursor + 1 < hi && self.pos[cursor + 1] <= x {
                cursor += 1;
            }
            while cursor > lo && self.pos[cursor] > x {
                cursor -= 1;
            }
            out.push(interpolate(&self.pos[lo..hi], &self.val[lo..hi], cursor - lo, x));
        }
        out
    }
}

/// Cubic Lagrange interpolation on the (up to) four samples around
/// index `i`, where `pos[i] ≤ x` unless `i` is the first sample.
fn interpolate(pos: &[f64], val: &[f64], i: usize, x: f64) -> f64 {
    let n = pos.len();
    if n == 1 {
        return val[0];
    }
    let width = n.min(4);
    let start = i.saturating_sub(1).min(n - width);
    let (p, v) = (&pos[start..start + width], &val[start..start + width]);
    if let Some(m) = p.iter().position(|&q| q == x) {
        return v[m];
    }
    let mut sum = 0.0;
    for m in 0..width {
        let mut basis = 1.0;
        for l in 0..width {
            if l != m {
                basis *= (x - p[l]) / (p[m] - p[l]);
            }
        }
        sum += basis * v[m];
    }
    sum
}

impl Iterator for Sweep<'_> {
    type Item = SweepRow;

    fn next(&mut self) -> Option<SweepRow> {
        let k = self.next_row;
        if k > self.grid.steps() {
            return None;
        }
        self.next_row += 1;
        if k > 0 {
            self.step(k - 1);
        }
        let values = self.row_values(k);
        Some(SweepRow {
            k,
            t: self.grid.t(k),
            values,
            loci: self.tracers.iter().map(|&r| r.min(1.0)).collect(),
        })
    }
}

/// The full solution on every grid node.
pub fn solve_field(problem: &TransportProblem, grid: &Grid) -> SolutionField {
    solve_component(problem, grid, Component::Full)
}

fn solve_component(problem: &TransportProblem, grid: &Grid, component: Component) -> SolutionField {
    let mut values = Vec::with_capacity(grid.rows() * grid.nodes());
    let n_loci = problem.phi.jump_points().len();
    let mut separatrix = Vec::with_capacity(grid.rows());
    let mut loci = alloc::vec![Vec::with_capacity(grid.rows()); n_loci];
    for row in Sweep::new(problem, *grid) {
        values.extend_from_slice(&row.values);
        separatrix.push(row.loci[0]);
        for (l, &r) in loci.iter_mut().zip(&row.loci[1..]) {
            l.push(r);
        }
    }
    SolutionField {
        grid: *grid,
        values,
        separatrix,
        loci,
        component,
        quantity: Quantity::State,
    }
}

/// `(w1, w2, w3)`: boundary, initial and source responses, each solved
/// on its own data.
pub fn decompose(problem: &TransportProblem, grid: &Grid) -> (SolutionField, SolutionField, SolutionField) {
    (
        solve_component(&problem.boundary_part(), grid, Component::Boundary),
        solve_component(&problem.initial_part(), grid, Component::Initial),
        solve_component(&problem.source_part(), grid, Component::Source),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(grid: &Grid, v: &str, phi: &str, b: &str, a: &str, f: &str, jumps: Vec<f64>) -> TransportProblem {
        let v = VelocityField::new(SpaceTimeField::parse(v).unwrap(), grid).unwrap();
        let phi = InitialProfile::new(ScalarProfile::parse(phi).unwrap(), jumps, grid).unwrap();
        let b = BoundarySignal::new(ScalarSignal::parse(b).unwrap(), grid).unwrap();
        let coeffs = TransportCoefficients::new(
            SpaceTimeField::parse(a).unwrap(),
            SpaceTimeField::parse(f).unwrap(),
            grid,
        )
        .unwrap();
        TransportProblem::new(v, phi, b, coeffs)
    }

    #[test]
    fn point_examples() {
        let grid = Grid::new(100, 0.001, 1.0).unwrap();
        let p = problem(&grid, "1", "sin(3*x)", "cos(2*t)", "0", "0", Vec::new());
        let c = Characteristics::new(&p.v, &grid);
        let w = solve_point(&p, &c, 0.3, 0.8).unwrap();
        assert!((w - libm::sin(1.5)).abs() < 1e-9);
        let w = solve_point(&p, &c, 0.6, 0.2).unwrap();
        assert!((w - libm::cos(0.8)).abs() < 1e-9);

        let p = problem(&grid, "1", "1", "0", "0.5", "0", Vec::new());
        let c = Characteristics::new(&p.v, &grid);
        let w = solve_point(&p, &c, 0.4, 0.7).unwrap();
        assert!((w - libm::exp(0.2)).abs() < 1e-12);
    }

    #[test]
    fn boundary_and_initial_slots_are_exact() {
        let grid = Grid::new(40, 0.01, 1.0).unwrap();
        let p = problem(&grid, "1 + 0.3*sin(t + 2*x)", "x^2 + 1", "1 + t", "0.2*x", "cos(t*x)", Vec::new());
        let field = solve_field(&p, &grid);
        for (j, x) in grid.xs().enumerate() {
            assert_eq!(field.value(0, j), p.phi.eval(x));
        }
        for k in 0..grid.rows() {
            assert_eq!(field.value(k, 0), p.b.eval(grid.t(k)));
        }
    }

    #[test]
    fn zero_data_gives_zero() {
        let grid = Grid::new(20, 0.01, 1.0).unwrap();
        let p = problem(&grid, "1 + x", "0", "0", "0", "0", Vec::new());
        assert!(solve_field(&p, &grid).values().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn source_accumulates_time_in_domain() {
        let grid = Grid::new(50, 0.01, 1.5).unwrap();
        let p = problem(&grid, "1", "0", "0", "0", "1", Vec::new());
        let field = solve_field(&p, &grid);
        for k in 0..grid.rows() {
            for (j, x) in grid.xs().enumerate() {
                let exact = grid.t(k).min(x);
                assert!((field.value(k, j) - exact).abs() < 1e-9, "k={k} j={j}");
            }
        }
    }

    #[test]
    fn finite_time_flush() {
        let grid = Grid::new(100, 0.005, 1.2).unwrap();
        let p = problem(&grid, "1", "sin(pi*x)", "0", "0", "0", Vec::new());
        let field = solve_field(&p, &grid);
        let k = grid.row_of(1.0);
        assert!(field.row(k).iter().all(|w| w.abs() <= 1e-9));
    }

    #[test]
    fn sweep_matches_point_solver() {
        let grid = Grid::new(50, 0.004, 0.8).unwrap();
        let p = problem(
            &grid,
            "1 + 0.4*sin(2*t + 3*x)",
            "cos(2*x)",
            "1 - 0.5*t",
            "0.3*sin(x + t)",
            "x*t",
            Vec::new(),
        );
        let field = solve_field(&p, &grid);
        let c = Characteristics::new(&p.v, &grid);
        for &k in &[20usize, 100, 200] {
            for j in (0..grid.nodes()).step_by(7) {
                let exact = solve_point(&p, &c, grid.t(k), grid.x(j)).unwrap();
                assert!((field.value(k, j) - exact).abs() < 1e-6, "k={k} j={j} sweep={} point={exact}", field.value(k, j));
            }
        }
    }

    #[test]
    fn jumps_travel_with_the_flow() {
        let grid = Grid::new(100, 0.002, 1.0).unwrap();
        let p = problem(&grid, "1", "max(0, min(1, 1e9*(x - 0.5)))", "0", "0", "0", alloc::vec![0.5]);
        let field = solve_field(&p, &grid);
        let k = grid.row_of(0.2);
        for (j, x) in grid.xs().enumerate() {
            let w = field.value(k, j);
            if x <= 0.7 - 1e-9 {
                assert!(w.abs() < 1e-9, "x={x} w={w}");
            } else if x > 0.7 + 1e-9 {
                assert!((w - 1.0).abs() < 1e-9, "x={x} w={w}");
            }
        }
        let j = 70;
        assert!(field.value(k, j).abs() < 1e-6, "left limit on the locus");
        assert!((field.jump_loci()[0][k] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn decomposition_sums_to_full() {
        let grid = Grid::new(60, 0.005, 1.5).unwrap();
        let p = problem(&grid, "1.2 + 0.5*cos(t + x)", "1 + x", "1 + sin(4*t)", "0.2", "x - t", Vec::new());
        let full = solve_field(&p, &grid);
        let (w1, w2, w3) = decompose(&p, &grid);
        for i in 0..full.values().len() {
            let s = w1.values()[i] + w2.values()[i] + w3.values()[i];
            assert!((full.values()[i] - s).abs() <= 1e-9);
        }
        assert_eq!(w1.component(), Component::Boundary);
    }

    #[test]
    fn boundary_indicator() {
        let grid = Grid::new(50, 0.01, 1.0).unwrap();
        let p = problem(&grid, "1", "0", "1", "0", "0", Vec::new());
        let (w1, w2, w3) = decompose(&p, &grid);
        for k in 0..grid.rows() {
            for (j, x) in grid.xs().enumerate() {
                let expect = if x <= grid.t(k) + 1e-12 { 1.0 } else { 0.0 };
                if (x - grid.t(k)).abs() > 1e-9 {
                    assert!((w1.value(k, j) - expect).abs() < 1e-14, "k={k} x={x}");
                }
            }
        }
        assert!(w2.values().iter().chain(w3.values()).all(|&w| w == 0.0));
    }
}
