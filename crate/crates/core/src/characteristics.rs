//! Characteristic curves `dX/ds = v(t0 + s, X)`, their inverses, the
//! separatrix `r0(t) = X(t; 0, 0)`, the jump loci and the sensitivity
//! `∂X/∂x0`.
//!
//! Integration is classical RK4 with the grid step. Stage evaluations
//! read `v` at `min(X, 1)`, so a curve that leaves the domain keeps the
//! outflow velocity; this only affects the final sub-step of an exit.

use alloc::vec::Vec;

use crate::fields::VelocityField;
use crate::grid::Grid;
use crate::signal::SpaceTimeField;
use crate::{Error, Result};

/// Target accuracy of exit sub-stepping.
const EXIT_TOL: f64 = 1e-12;
/// Target residual of the bisection inverses.
const INVERSE_TOL: f64 = 1e-12;
const MAX_BISECTIONS: usize = 200;

/// `v` past the outflow follows the field's own extension when that is
/// finite and positive, and is frozen at `x = 1` otherwise.
#[inline]
fn speed(v: &SpaceTimeField, t: f64, x: f64) -> f64 {
    if x > 1.0 {
        let s = v.eval(t, x);
        if s > 0.0 && s.is_finite() {
            return s;
        }
    }
    v.eval(t, x.min(1.0))
}

/// One RK4 step of length `h` from `(t, x)`.
#[inline]
pub(crate) fn rk4(v: &SpaceTimeField, t: f64, x: f64, h: f64) -> f64 {
    let half = 0.5 * h;
    let k1 = speed(v, t, x);
    let k2 = speed(v, t + half, x + half * k1);
    let k3 = speed(v, t + half, x + half * k2);
    let k4 = speed(v, t + h, x + h * k3);
    x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// How a characteristic ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exit {
    /// Reached `x = 1` after running for `s_max`.
    Boundary { s_max: f64 },
    /// Still inside the domain at the end of the requested window.
    Alive,
}

/// A sampled trajectory `s ↦ X(s; t0, x0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicPath {
    pub t0: f64,
    pub x0: f64,
    /// `(s, X(s))`, increasing in both coordinates, starting at `(0, x0)`.
    pub samples: Vec<(f64, f64)>,
    pub exit: Exit,
}

impl CharacteristicPath {
    /// Last sampled position.
    pub fn end(&self) -> f64 {
        self.samples.last().map_or(self.x0, |&(_, x)| x)
    }

    /// Position at `s` by linear interpolation between samples.
    pub fn position(&self, s: f64) -> f64 {
        let i = self.samples.partition_point(|&(si, _)| si <= s);
        match i {
            0 => self.x0,
            n if n == self.samples.len() => self.end(),
            _ => {
                let (s0, x0) = self.samples[i - 1];
                let (s1, x1) = self.samples[i];
                x0 + (x1 - x0) * (s - s0) / (s1 - s0)
            }
        }
    }
}

/// Walks the curve from `(t0, x0)` for at most `until`, reporting every
/// sample to `visit`. Returns the exit status and the final position.
fn integrate(
    v: &SpaceTimeField,
    t0: f64,
    x0: f64,
    until: f64,
    dt: f64,
    mut visit: impl FnMut(f64, f64),
) -> (Exit, f64) {
    visit(0.0, x0);
    if x0 >= 1.0 {
        return (Exit::Boundary { s_max: 0.0 }, x0);
    }
    let mut x = x0;
    let mut s = 0.0;
    let mut k = 0usize;
    while s < until {
        k += 1;
        let next = (k as f64 * dt).min(until);
        let h = next - s;
        if h <= 0.0 {
            break;
        }
        let xn = rk4(v, t0 + s, x, h);
        if xn >= 1.0 {
            let (h_exit, x_exit) = exit_substep(v, t0 + s, x, h);
            let s_max = s + h_exit;
            visit(s_max, x_exit);
            return (Exit::Boundary { s_max }, x_exit);
        }
        s = next;
        x = xn;
        visit(s, x);
    }
    (Exit::Alive, x)
}

/// Finds the sub-step `h* ∈ (0, h]` with `X(h*) = 1` by bisection.
fn exit_substep(v: &SpaceTimeField, t: f64, x: f64, h: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (0.0, h);
    let mut best = (h, 1.0f64);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let xm = rk4(v, t, x, mid);
        if (xm - 1.0).abs() <= EXIT_TOL {
            best = (mid, xm);
            break;
        }
        if xm >= 1.0 {
            hi = mid;
            best = (mid, xm);
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * h {
            break;
        }
    }
    (best.0, best.1.min(1.0))
}

/// Integrates the characteristic through `(t0, x0)` for `until` time
/// units, stopping early if it leaves through `x = 1`.
pub fn flow(v: &VelocityField, t0: f64, x0: f64, until: f64, dt: f64) -> CharacteristicPath {
    let mut samples = Vec::with_capacity(libm::ceil(until / dt) as usize + 2);
    let (exit, _) = integrate(v.field(), t0, x0, until, dt, |s, x| samples.push((s, x)));
    CharacteristicPath {
        t0,
        x0,
        samples,
        exit,
    }
}

/// `X(s; t0, x0)` without storing the path; `None` if the curve exits
/// before `s`.
pub fn endpoint(v: &VelocityField, t0: f64, x0: f64, s: f64, dt: f64) -> Option<f64> {
    match integrate(v.field(), t0, x0, s, dt, |_, _| {}) {
        (Exit::Alive, x) => Some(x),
        (Exit::Boundary { s_max }, x) if s_max >= s => Some(x),
        _ => None,
    }
}

/// Loci `r_i(t_k) = X(t_k; 0, ξ_i)` on the grid times, held at 1 after
/// they exit.
pub fn jump_loci(jump_points: &[f64], v: &VelocityField, grid: &Grid) -> Vec<Vec<f64>> {
    jump_points
        .iter()
        .map(|&xi| sampled_curve(v.field(), xi, grid))
        .collect()
}

fn sampled_curve(v: &SpaceTimeField, x0: f64, grid: &Grid) -> Vec<f64> {
    let dt = grid.dt();
    let mut out = Vec::with_capacity(grid.rows());
    let mut x = x0.min(1.0);
    out.push(x);
    for k in 0..grid.steps() {
        if x < 1.0 {
            x = rk4(v, grid.t(k), x, dt).min(1.0);
        }
        out.push(x);
    }
    out
}

/// `∂X/∂x0(s; t0, x0) = exp(∫_0^s ∂v/∂x(t0 + l, X(l)) dl)` by the
/// trapezoid rule on the RK4 samples.
pub fn flow_sensitivity(v: &VelocityField, t0: f64, x0: f64, s: f64, dt: f64) -> f64 {
    let path = flow(v, t0, x0, s, dt);
    sensitivity_along(v, &path)
}

/// Sensitivity at the last sample of a stored path.
pub fn sensitivity_along(v: &VelocityField, path: &CharacteristicPath) -> f64 {
    let mut integral = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for &(s, x) in &path.samples {
        let g = v.dvdx(path.t0 + s, x);
        if let Some((sp, gp)) = prev {
            integral += 0.5 * (s - sp) * (g + gp);
        }
        prev = Some((s, g));
    }
    libm::exp(integral)
}

/// The characteristic from the corner, sampled on the grid times.
#[derive(Debug, Clone, PartialEq)]
pub struct Separatrix {
    dt: f64,
    r: Vec<f64>,
}

impl Separatrix {
    pub fn new(v: &VelocityField, grid: &Grid) -> Separatrix {
        Separatrix {
            dt: grid.dt(),
            r: sampled_curve(v.field(), 0.0, grid),
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.r
    }

    /// `r0(t_k)`, or `None` past the sampled horizon.
    pub fn at_row(&self, k: usize) -> Option<f64> {
        self.r.get(k).copied()
    }

    /// Row index if `t` is a grid time to within rounding.
    fn row_of(&self, t: f64) -> Option<usize> {
        let k = libm::round(t / self.dt);
        let exact = (t - k * self.dt).abs() <= 1e-12 * t.max(1.0);
        (exact && k >= 0.0 && (k as usize) < self.r.len()).then_some(k as usize)
    }
}

/// Characteristic machinery bound to one velocity and one grid, with the
/// separatrix and the running velocity minimum computed up front.
#[derive(Debug, Clone)]
pub struct Characteristics<'a> {
    v: &'a VelocityField,
    dt: f64,
    separatrix: Separatrix,
    running_min: Vec<f64>,
}

impl<'a> Characteristics<'a> {
    pub fn new(v: &'a VelocityField, grid: &Grid) -> Characteristics<'a> {
        Characteristics {
            v,
            dt: grid.dt(),
            separatrix: Separatrix::new(v, grid),
            running_min: v.running_min(),
        }
    }

    pub fn velocity(&self) -> &VelocityField {
        self.v
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn separatrix(&self) -> &Separatrix {
        &self.separatrix
    }

    /// `r0(t)`, held at 1 after the corner characteristic exits.
    pub fn r0(&self, t: f64) -> f64 {
        if let Some(k) = self.separatrix.row_of(t) {
            return self.separatrix.r[k];
        }
        endpoint(self.v, 0.0, 0.0, t, self.dt).unwrap_or(1.0)
    }

    fn vmin_until(&self, t: f64) -> Option<f64> {
        let k = libm::floor(t / self.dt + 1e-9);
        if k < 0.0 || self.running_min.is_empty() {
            return None;
        }
        let k = (k as usize).min(self.running_min.len() - 1);
        Some(self.running_min[k])
    }

    pub fn flow(&self, t0: f64, x0: f64, until: f64) -> CharacteristicPath {
        flow(self.v, t0, x0, until, self.dt)
    }

    /// Solves `X(t; 0, x0) = x` for `x0`; needs `x > r0(t)`.
    pub fn backtrace_x0(&self, t: f64, x: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(x);
        }
        let r0 = self.r0(t);
        if x <= r0 {
            return Err(Error::Precondition(alloc::format!(
                "x = {x} lies in the boundary region at t = {t} (r0 = {r0})"
            )));
        }
        let (mut lo, mut hi) = (0.0f64, x);
        let mut best = (f64::INFINITY, 0.5 * (lo + hi));
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            match endpoint(self.v, 0.0, mid, t, self.dt) {
                Some(xm) => {
                    let r = (xm - x).abs();
                    if r < best.0 {
                        best = (r, mid);
                    }
                    if r <= INVERSE_TOL {
                        break;
                    }
                    if xm > x {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                None => hi = mid,
            }
            if hi - lo <= f64::EPSILON {
                break;
            }
        }
        // Probes that exit early only move `hi`; the bracket is then the answer.
        Ok(if best.0 <= INVERSE_TOL { best.1 } else { 0.5 * (lo + hi) })
    }

    /// Solves `X(t − t0; t0, 0) = x` for `t0`; needs `x ≤ r0(t)`.
    pub fn backtrace_t0(&self, t: f64, x: f64) -> Result<f64> {
        let r0 = self.r0(t);
        if x > r0 {
            return Err(Error::Precondition(alloc::format!(
                "x = {x} lies in the initial-data region at t = {t} (r0 = {r0})"
            )));
        }
        if x <= 0.0 {
            return Ok(t);
        }
        let reach = |t0: f64| endpoint(self.v, t0, 0.0, t - t0, self.dt);
        let mut lo = match self.vmin_until(t) {
            Some(m) => (t - x / m).max(0.0),
            None => 0.0,
        };
        // Discretisation can put the bracket's far end just short of x.
        if matches!(reach(lo), Some(xl) if xl < x) {
            lo = 0.0;
        }
        let mut hi = t;
        let mut best = (f64::INFINITY, 0.5 * (lo + hi));
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            match reach(mid) {
                Some(xm) => {
                    let r = (xm - x).abs();
                    if r < best.0 {
                        best = (r, mid);
                    }
                    if r <= INVERSE_TOL {
                        break;
                    }
                    if xm > x {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                None => lo = mid,
            }
            if hi - lo <= f64::EPSILON * t.max(1.0) {
                break;
            }
        }
        Ok(if best.0 <= INVERSE_TOL { best.1 } else { 0.5 * (lo + hi) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(src: &str, dt: f64, horizon: f64) -> (VelocityField, Grid) {
        let grid = Grid::new(100, dt, horizon).unwrap();
        let v = VelocityField::new(SpaceTimeField::parse(src).unwrap(), &grid).unwrap();
        (v, grid)
    }

    #[test]
    fn constant_velocity_is_a_shift() {
        let (v, _) = setup("1", 1e-3, 1.0);
        let p = flow(&v, 0.0, 0.25, 0.5, 1e-3);
        assert_eq!(p.exit, Exit::Alive);
        assert!((p.end() - 0.75).abs() < 1e-12);
        assert!(p.samples.windows(2).all(|w| w[1].1 > w[0].1));
    }

    #[test]
    fn linear_velocity_exit_time() {
        let (v, _) = setup("1 + x", 1e-3, 1.0);
        let p = flow(&v, 0.0, 0.0, 1.0, 1e-3);
        match p.exit {
            Exit::Boundary { s_max } => assert!((s_max - core::f64::consts::LN_2).abs() < 1e-9),
            Exit::Alive => panic!("must exit"),
        }
        assert!((p.end() - 1.0).abs() <= 1e-10);
        assert!(p.samples.iter().all(|&(_, x)| (0.0..=1.0).contains(&x)));
        let s = 0.3;
        assert!((p.position(s) - (libm::exp(s) - 1.0)).abs() < 1e-6);
    }

    #[test]
    fn start_on_outflow_exits_immediately() {
        let (v, _) = setup("1", 1e-3, 1.0);
        let p = flow(&v, 0.0, 1.0, 1.0, 1e-3);
        assert_eq!(p.exit, Exit::Boundary { s_max: 0.0 });
        assert_eq!(p.samples.len(), 1);
    }

    #[test]
    fn loci_examples() {
        let (v, grid) = setup("1", 0.01, 1.0);
        let l = jump_loci(&[0.5], &v, &grid);
        for (k, &r) in l[0].iter().enumerate() {
            assert!((r - (0.5 + grid.t(k)).min(1.0)).abs() < 1e-12);
        }
        assert!(jump_loci(&[], &v, &grid).is_empty());
        let (v, grid) = setup("2", 0.01, 1.0);
        let l = jump_loci(&[0.25, 0.75], &v, &grid);
        for k in 0..grid.rows() {
            let t = grid.t(k);
            assert!((l[0][k] - (0.25 + 2.0 * t).min(1.0)).abs() < 1e-12);
            assert!((l[1][k] - (0.75 + 2.0 * t).min(1.0)).abs() < 1e-12);
            assert!(l[0][k] <= l[1][k]);
        }
    }

    #[test]
    fn backtrace_at_the_exit_corner() {
        // The separatrix reaches x = 1 exactly at the last grid time.
        let (v, grid) = setup("0.5", 1e-3, 2.0);
        let c = Characteristics::new(&v, &grid);
        let t = grid.t(grid.steps());
        let x0 = if 1.0 > c.r0(t) { c.backtrace_x0(t, 1.0) } else { c.backtrace_t0(t, 1.0) };
        assert!(x0.unwrap().abs() < 1e-10);
    }

    #[test]
    fn backtrace_examples() {
        let (v, grid) = setup("1", 1e-3, 2.0);
        let c = Characteristics::new(&v, &grid);
        assert!((c.backtrace_x0(0.3, 0.8).unwrap() - 0.5).abs() < 1e-10);
        assert!((c.backtrace_t0(1.0, 0.4).unwrap() - 0.6).abs() < 1e-10);
        assert_eq!(c.backtrace_x0(0.0, 0.37).unwrap(), 0.37);
        assert!(c.backtrace_x0(0.5, 0.3).is_err());
        assert!(c.backtrace_t0(0.2, 0.5).is_err());

        let (v, grid) = setup("2", 1e-3, 2.0);
        let c = Characteristics::new(&v, &grid);
        assert!((c.backtrace_t0(1.0, 0.5).unwrap() - 0.75).abs() < 1e-10);

        let (v, grid) = setup("1 + x", 1e-3, 2.0);
        let c = Characteristics::new(&v, &grid);
        let x0 = c.backtrace_x0(0.2, 0.6).unwrap();
        assert!((x0 - (1.6 * libm::exp(-0.2) - 1.0)).abs() < 1e-9);
        let t0 = c.backtrace_t0(1.0, 0.5).unwrap();
        assert!((t0 - (1.0 - libm::log(1.5))).abs() < 1e-9);
    }

    #[test]
    fn sensitivity_examples() {
        let (v, _) = setup("3", 1e-3, 1.0);
        assert_eq!(flow_sensitivity(&v, 0.0, 0.1, 0.2, 1e-3), 1.0);
        let (v, _) = setup("1 + x", 1e-3, 1.0);
        assert!((flow_sensitivity(&v, 0.0, 0.0, 0.5, 1e-3) - libm::exp(0.5)).abs() < 1e-8);
        assert_eq!(flow_sensitivity(&v, 0.0, 0.2, 0.0, 1e-3), 1.0);
    }

    #[test]
    fn separatrix_bounds() {
        let (v, grid) = setup("0.5 + 0.3*sin(3*t + x)", 0.01, 3.0);
        let sep = Separatrix::new(&v, &grid);
        let vmin = v.running_min();
        assert_eq!(sep.samples()[0], 0.0);
        for k in 1..grid.rows() {
            let r = sep.samples()[k];
            assert!(r >= sep.samples()[k - 1]);
            assert!(r >= (grid.t(k) * vmin[k]).min(1.0) - 1e-12);
        }
    }
}
