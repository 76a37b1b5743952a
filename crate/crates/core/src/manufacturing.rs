//! The production-line model `ρ_t + λ(W(t)) ρ_x = 0`, `W = ∫_0^1 ρ dx`,
//! under the feedback `u(t) = ρs·λ(W(t))·e^{b(t)}`, which makes the inflow
//! density `ρ(t, 0) = ρs·e^{b(t)}`.
//!
//! The velocity `v(t) = λ(W(t))` is found window by window as the fixed
//! point of `G v = λ(∫_0^1 ρ_v dx)`, where `ρ_v` transports the initial
//! and inflow densities with the candidate velocity. Within a grid step
//! `v` is linear in `t`, so the travelled distance `D(t) = ∫_0^t v` is
//! piecewise quadratic and inverts in closed form.

use alloc::vec::Vec;

use crate::bounds::{certify, BoundCertificate, Trajectory};
use crate::continuity::{solve_continuity, ContinuityProblem};
use crate::fields::{BoundarySignal, InitialProfile, VelocityField, COMPATIBILITY_TOL};
use crate::grid::Grid;
use crate::norms::NormOrder;
use crate::quadrature::trapezoid_unit;
use crate::signal::{ScalarSignal, SpaceTimeField, FD_STEP};
use crate::transport::SolutionField;
use crate::{Error, Result};

/// Samples used to scan `λ` over the density range.
pub const RANGE_SAMPLES: usize = 10_000;
/// Safety factor applied to every sampled Lipschitz constant.
pub const LIPSCHITZ_SAFETY: f64 = 1.1;
pub const FIXED_POINT_TOL: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 200;

/// Model data with the density range that bounds every solution.
#[derive(Debug, Clone)]
pub struct ProductionScenario {
    pub rho_s: f64,
    pub rho0: InitialProfile,
    pub b: BoundarySignal,
    /// Speed law `λ(W)`.
    pub lambda: ScalarSignal,
    b_inf: f64,
    b_sup: f64,
    rho_min: f64,
    rho_max: f64,
    v_min: f64,
    v_max: f64,
}

/// Corner residuals of the closed loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductionCompatibility {
    /// `|ρs·e^{b(0)} − ρ0(0)|`.
    pub value_residual: f64,
    /// `|ḃ(0) + λ(∫ρ0)·ρ0′(0)/ρ0(0)|`.
    pub slope_residual: f64,
    pub tolerance: f64,
}

impl ProductionCompatibility {
    pub fn passes(&self) -> bool {
        self.value_residual <= self.tolerance && self.slope_residual <= self.tolerance
    }
}

fn scan(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| {
        if i + 1 == n {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    })
}

/// Golden-section search for the largest value of `g` on `[lo, hi]`.
fn golden_max(g: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..100 {
        if gc > gd {
            hi = d;
            d = c;
            gd = gc;
            c = hi - INV_PHI * (hi - lo);
            gc = g(c);
        } else {
            lo = c;
            c = d;
            gc = gd;
            d = lo + INV_PHI * (hi - lo);
            gd = g(d);
        }
    }
    g(0.5 * (lo + hi)).max(gc).max(gd)
}

/// `(inf b, sup b)` over `[0, horizon]`: grid samples, with every local
/// extremum refined between its neighbouring grid times.
fn signal_range(b: &BoundarySignal, grid: &Grid) -> (f64, f64) {
    let samples = b.samples(grid);
    let mut inf = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let mut sup = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for k in 0..samples.len() {
        let prev = samples[k.saturating_sub(1)];
        let next = samples[(k + 1).min(samples.len() - 1)];
        let (lo, hi) = (grid.t(k.saturating_sub(1)), grid.t((k + 1).min(grid.steps())));
        if samples[k] >= prev && samples[k] >= next {
            sup = sup.max(golden_max(&|t| b.eval(t), lo, hi));
        }
        if samples[k] <= prev && samples[k] <= next {
            inf = inf.min(-golden_max(&|t| -b.eval(t), lo, hi));
        }
    }
    (inf, sup)
}

impl ProductionScenario {
    /// `λ` must be positive on the density range spanned by `ρ0` and the
    /// inflow density over the horizon.
    pub fn new(
        rho_s: f64,
        rho0: InitialProfile,
        b: BoundarySignal,
        lambda: ScalarSignal,
        grid: &Grid,
    ) -> Result<ProductionScenario> {
        if !(rho_s > 0.0 && rho_s.is_finite()) {
            return Err(Error::InvalidInput(alloc::format!("rho_s must be positive (got {rho_s})")));
        }
        let (b_inf, b_sup) = signal_range(&b, grid);
        let r0 = rho0.samples(grid);
        let rho_min = r0.iter().copied().fold(rho_s * libm::exp(b_inf), f64::min);
        let rho_max = r0.iter().copied().fold(rho_s * libm::exp(b_sup), f64::max);
        if rho_min.is_nan() || rho_min <= 0.0 {
            return Err(Error::InvalidInput("initial density must be positive".into()));
        }
        let (mut v_min, mut v_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in scan(rho_min, rho_max, RANGE_SAMPLES) {
            let l = lambda.eval(s);
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::NonPositiveSpeed { load: s, value: l });
            }
            v_min = v_min.min(l);
            v_max = v_max.max(l);
        }
        Ok(ProductionScenario {
            rho_s,
            rho0,
            b,
            lambda,
            b_inf,
            b_sup,
            rho_min,
            rho_max,
            v_min,
            v_max,
        })
    }

    /// `(inf b, sup b)` over the horizon.
    pub fn b_range(&self) -> (f64, f64) {
        (self.b_inf, self.b_sup)
    }

    /// `(ρmin, ρmax)`: the envelope of every solution.
    pub fn density_range(&self) -> (f64, f64) {
        (self.rho_min, self.rho_max)
    }

    /// `(min λ, max λ)` over the density range.
    pub fn speed_range(&self) -> (f64, f64) {
        (self.v_min, self.v_max)
    }

    /// `b̃(t) = ρs·e^{b(t)}`.
    #[inline]
    pub fn inflow(&self, t: f64) -> f64 {
        self.rho_s * libm::exp(self.b.eval(t))
    }

    /// Initial load `∫ρ0` by the trapezoid rule on the grid nodes.
    pub fn initial_load(&self, grid: &Grid) -> f64 {
        trapezoid_unit(&self.rho0.samples(grid))
    }

    pub fn compatibility(&self, grid: &Grid) -> ProductionCompatibility {
        let r00 = self.rho0.eval(0.0);
        let speed = self.lambda.eval(self.initial_load(grid));
        ProductionCompatibility {
            value_residual: (self.inflow(0.0) - r00).abs(),
            slope_residual: (self.b.rate(0.0) + speed * self.rho0.slope(0.0) / r00).abs(),
            tolerance: COMPATIBILITY_TOL,
        }
    }
}

/// `r = 1/min λ` over the density range.
pub fn terminal_time(scenario: &ProductionScenario) -> f64 {
    1.0 / scenario.v_min
}

/// Sampled Lipschitz bounds, already multiplied by the safety factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lipschitz {
    pub lambda: f64,
    pub rho0: f64,
    pub inflow: f64,
}

impl Lipschitz {
    /// `λ` over the density range, `ρ0` over the grid nodes and `b̃` over
    /// `[0, horizon + 1]` with the grid step.
    pub fn estimate(scenario: &ProductionScenario, grid: &Grid) -> Lipschitz {
        let (lo, hi) = (scenario.rho_min, scenario.rho_max);
        let h_lambda = if hi > lo { (hi - lo) / RANGE_SAMPLES as f64 } else { FD_STEP };
        let lambda = scan(lo, hi, RANGE_SAMPLES)
            .map(|s| {
                let d = (scenario.lambda.eval(s + h_lambda) - scenario.lambda.eval(s)) / h_lambda;
                let e = (scenario.lambda.eval(s) - scenario.lambda.eval(s - h_lambda)) / h_lambda;
                d.abs().max(e.abs())
            })
            .fold(0.0, f64::max);
        let rho0 = grid
            .xs()
            .map(|x| {
                let h = if x <= 0.5 { FD_STEP } else { -FD_STEP };
                scenario.rho0.profile().forward_derivative(x, h).abs()
            })
            .fold(0.0, f64::max);
        let steps = libm::ceil((grid.horizon() + 1.0) / grid.dt()) as usize;
        let inflow = (0..=steps)
            .map(|k| {
                let t = k as f64 * grid.dt();
                (scenario.inflow(t) * scenario.b.rate(t)).abs()
            })
            .fold(0.0, f64::max);
        Lipschitz {
            lambda: LIPSCHITZ_SAFETY * lambda,
            rho0: LIPSCHITZ_SAFETY * rho0,
            inflow: LIPSCHITZ_SAFETY * inflow,
        }
    }

    /// Longest admissible window
    /// `(1 + Lλ(max(Lρ0, Lb̃/vmin) + Lb̃/vmin))^{−1}`.
    pub fn window(&self, v_min: f64) -> f64 {
        let lb = self.inflow / v_min;
        1.0 / (1.0 + self.lambda * (self.rho0.max(lb) + lb))
    }

    /// Bound on the contraction factor of a window of length `t` whose
    /// starting profile has Lipschitz constant `l_start`.
    pub fn contraction(&self, t: f64, l_start: f64, v_min: f64) -> f64 {
        t * self.lambda * (l_start + self.inflow / v_min)
    }
}

/// Outcome of the fixed-point iteration on one window.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointReport {
    pub window: (f64, f64),
    /// Longest admissible window length.
    pub window_limit: f64,
    pub iterations: usize,
    /// `‖v_{k+1} − v_k‖_∞` of the last iteration.
    pub residual: f64,
    /// Theoretical contraction factor of this window.
    pub contraction_bound: f64,
    /// Largest ratio of successive iterate distances, when defined.
    pub observed_contraction: Option<f64>,
    pub lipschitz: Lipschitz,
}

/// Velocity samples and travelled distance on the grid times.
#[derive(Debug, Clone)]
struct History {
    dt: f64,
    v: Vec<f64>,
    d: Vec<f64>,
}

impl History {
    fn new(dt: f64, v0: f64) -> History {
        History {
            dt,
            v: alloc::vec![v0],
            d: alloc::vec![0.0],
        }
    }

    fn truncate(&mut self, rows: usize) {
        self.v.truncate(rows);
        self.d.truncate(rows);
    }

    fn push(&mut self, v: f64) {
        let k = self.v.len() - 1;
        let d = self.d[k] + 0.5 * self.dt * (self.v[k] + v);
        self.v.push(v);
        self.d.push(d);
    }

    /// Entry time `t0` with `D(t_k) − D(t0) = x`; requires `x ≤ D(t_k)`.
    fn entry_time(&self, k: usize, x: f64) -> f64 {
        let target = (self.d[k] - x).max(0.0);
        let m = self.d[..=k].partition_point(|&d| d <= target).saturating_sub(1).min(k.saturating_sub(1));
        if k == 0 {
            return 0.0;
        }
        let y = target - self.d[m];
        let beta = self.v[m];
        let alpha = (self.v[m + 1] - self.v[m]) / (2.0 * self.dt);
        let disc = (beta * beta + 4.0 * alpha * y).max(0.0);
        let tau = 2.0 * y / (beta + libm::sqrt(disc));
        (m as f64 * self.dt + tau).min(k as f64 * self.dt)
    }
}

/// `ρ_v(t_k, x)` for the velocity history.
fn density(scenario: &ProductionScenario, hist: &History, k: usize, x: f64) -> f64 {
    let d = hist.d[k];
    if x > d {
        scenario.rho0.eval(x - d)
    } else {
        scenario.inflow(hist.entry_time(k, x))
    }
}

fn load(scenario: &ProductionScenario, hist: &History, grid: &Grid, k: usize, row: &mut Vec<f64>) -> f64 {
    row.clear();
    row.extend(grid.xs().map(|x| density(scenario, hist, k, x)));
    trapezoid_unit(row)
}

/// Iterates `G` on rows `ka+1 ..= kb` with the history up to `ka` fixed.
fn iterate_window(
    scenario: &ProductionScenario,
    grid: &Grid,
    hist: &mut History,
    ka: usize,
    kb: usize,
    lip: &Lipschitz,
    l_start: f64,
) -> Result<FixedPointReport> {
    let window_limit = lip.window(scenario.v_min);
    let length = grid.t(kb) - grid.t(ka);
    if length > window_limit * (1.0 + 1e-12) {
        return Err(Error::WindowTooLong {
            window: length,
            dt: grid.dt(),
        });
    }
    let mut row = Vec::with_capacity(grid.nodes());
    let start = hist.v[ka];
    hist.truncate(ka + 1);
    for _ in ka..kb {
        hist.push(start);
    }
    let mut residual = f64::INFINITY;
    let mut last_distance: Option<f64> = None;
    let mut observed: Option<f64> = None;
    let mut iterations = 0;
    let mut next = Vec::with_capacity(kb - ka);
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        next.clear();
        for k in ka + 1..=kb {
            next.push(scenario.lambda.eval(load(scenario, hist, grid, k, &mut row)));
        }
        residual = next
            .iter()
            .zip(&hist.v[ka + 1..])
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if let Some(prev) = last_distance {
            if prev > 0.0 {
                let ratio = residual / prev;
                observed = Some(observed.map_or(ratio, |o: f64| o.max(ratio)));
            }
        }
        last_distance = Some(residual);
        hist.truncate(ka + 1);
        for &v in &next {
            hist.push(v);
        }
        if residual <= FIXED_POINT_TOL {
            break;
        }
    }
    let contraction_bound = lip.contraction(length, l_start, scenario.v_min);
    if residual > FIXED_POINT_TOL {
        return Err(Error::NoConvergence {
            iterations,
            residual,
            contraction: contraction_bound,
        });
    }
    Ok(FixedPointReport {
        window: (grid.t(ka), grid.t(kb)),
        window_limit,
        iterations,
        residual,
        contraction_bound,
        observed_contraction: observed,
        lipschitz: *lip,
    })
}

/// Fixed-point velocity on the single window `[0, t_kb]`.
pub fn fixed_point_velocity(scenario: &ProductionScenario, grid: &Grid, kb: usize) -> Result<(Vec<f64>, FixedPointReport)> {
    let lip = Lipschitz::estimate(scenario, grid);
    let mut hist = History::new(grid.dt(), scenario.lambda.eval(scenario.initial_load(grid)));
    let report = iterate_window(scenario, grid, &mut hist, 0, kb, &lip, lip.rho0)?;
    Ok((hist.v, report))
}

/// A simulated closed loop.
#[derive(Debug, Clone)]
pub struct ClosedLoopRun {
    /// Density on the grid.
    pub rho: SolutionField,
    /// `v(t_k) = λ(W(t_k))` from the fixed point.
    pub velocity: Vec<f64>,
    /// `W(t_k)` by quadrature of the density rows.
    pub load: Vec<f64>,
    /// `W(t_k)` as evaluated inside `G` at the fixed point.
    pub fixed_point_load: Vec<f64>,
    /// Feedback `u(t_k) = ρs·λ(W(t_k))·e^{b(t_k)}`.
    pub control: Vec<f64>,
    pub windows: Vec<FixedPointReport>,
    pub terminal_time: f64,
}

/// Chains fixed-point windows over the grid horizon and solves the
/// resulting continuity problem with the spatially uniform velocity.
pub fn simulate_closed_loop(scenario: &ProductionScenario, grid: &Grid) -> Result<ClosedLoopRun> {
    let lip = Lipschitz::estimate(scenario, grid);
    let window_limit = lip.window(scenario.v_min);
    let stride = libm::floor(window_limit / grid.dt() * (1.0 + 1e-12)) as usize;
    if stride == 0 {
        return Err(Error::WindowTooLong {
            window: grid.dt(),
            dt: grid.dt(),
        });
    }
    let mut hist = History::new(grid.dt(), scenario.lambda.eval(scenario.initial_load(grid)));
    let mut windows = Vec::new();
    let mut ka = 0;
    while ka < grid.steps() {
        let kb = (ka + stride).min(grid.steps());
        let l_start = if ka == 0 {
            lip.rho0
        } else {
            lip.rho0.max(lip.inflow / scenario.v_min)
        };
        windows.push(iterate_window(scenario, grid, &mut hist, ka, kb, &lip, l_start)?);
        ka = kb;
    }
    let velocity = hist.v.clone();
    let mut row = Vec::with_capacity(grid.nodes());
    let fixed_point_load: Vec<f64> = (0..grid.rows()).map(|k| load(scenario, &hist, grid, k, &mut row)).collect();

    let samples = velocity.clone();
    let dt = grid.dt();
    let v_signal = ScalarSignal::new(move |t| {
        let s = (t / dt).clamp(0.0, (samples.len() - 1) as f64);
        let m = (libm::floor(s) as usize).min(samples.len().saturating_sub(2));
        let frac = s - m as f64;
        match samples.get(m + 1) {
            Some(&next) => samples[m] + frac * (next - samples[m]),
            None => samples[m],
        }
    });
    let v = VelocityField::new(SpaceTimeField::from_signal(v_signal), grid)?;
    let problem = ContinuityProblem::new(scenario.rho_s, scenario.rho0.clone(), scenario.b.clone(), v)?;
    let rho = solve_continuity(&problem, grid);
    let load_trace: Vec<f64> = rho.rows().map(trapezoid_unit).collect();
    let control = (0..grid.rows())
        .map(|k| scenario.rho_s * velocity[k] * libm::exp(scenario.b.eval(grid.t(k))))
        .collect();
    Ok(ClosedLoopRun {
        rho,
        velocity,
        load: load_trace,
        fixed_point_load,
        control,
        windows,
        terminal_time: terminal_time(scenario),
    })
}

/// Envelope check `ρmin ≤ ρ ≤ ρmax` on every node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeReport {
    pub rho_min: f64,
    pub rho_max: f64,
    pub observed_min: f64,
    pub observed_max: f64,
    pub violations: usize,
    /// Relative tolerance granted to interpolation overshoot.
    pub tolerance: f64,
}

impl EnvelopeReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

pub fn envelope_check(scenario: &ProductionScenario, run: &ClosedLoopRun) -> EnvelopeReport {
    let tolerance = 1e-8;
    let (lo, hi) = scenario.density_range();
    let (mut omin, mut omax, mut violations) = (f64::INFINITY, f64::NEG_INFINITY, 0);
    for &r in run.rho.values() {
        omin = omin.min(r);
        omax = omax.max(r);
        if r < lo * (1.0 - tolerance) || r > hi * (1.0 + tolerance) {
            violations += 1;
        }
    }
    EnvelopeReport {
        rho_min: lo,
        rho_max: hi,
        observed_min: omin,
        observed_max: omax,
        violations,
        tolerance,
    }
}

/// Closed-loop certificates, with an `nx/2` companion run for the slack.
pub fn certify_closed_loop(
    scenario: &ProductionScenario,
    run: &ClosedLoopRun,
    coarse: Option<&ClosedLoopRun>,
    orders: &[NormOrder],
    mus: &[f64],
) -> Result<Vec<BoundCertificate>> {
    let grid = run.rho.grid();
    let traj = Trajectory::manufacturing(
        &run.rho,
        coarse.map(|c| &c.rho),
        scenario.b.samples(grid),
        &run.velocity,
        run.terminal_time,
    );
    certify(&traj, orders, mus)
}
