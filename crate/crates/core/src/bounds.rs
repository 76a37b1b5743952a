//! Right-hand sides of the stability estimates, their certification
//! along simulated trajectories, and the gain and bias experiments.
//!
//! The boundary coefficient of the finite-`p` estimates is evaluated as
//! `(vmin·(exp(p(μ+A)/vmin) − 1)/(p(μ+A)))^{1/p}`, the form established
//! by the proof of the boundary-response bound. The form without the
//! `vmin` factor under the root is reported alongside as
//! `rhs_displayed`.

use alloc::vec::Vec;
use core::fmt;

use crate::continuity::{equilibrium_profile, solve_continuity, ContinuityProblem};
use crate::fields::{BoundarySignal, InitialProfile, VelocityField};
use crate::grid::Grid;
use crate::norms::{fading_memory_max, heaviside_h, log_norm, norm, ExtremalTrace, Extremals, NormOrder};
use crate::quadrature::{trapezoid_richardson, RichardsonEstimate};
use crate::signal::{ScalarSignal, SpaceTimeField};
use crate::transport::{Quantity, SolutionField, TransportProblem};
use crate::{Error, Result};

/// Fixed part of the certificate slack.
pub const BASE_SLACK: f64 = 1e-6;
/// Weight of the measured discretisation indicator in the slack.
pub const INDICATOR_WEIGHT: f64 = 10.0;

/// Which estimate a certificate checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EstimateId {
    /// Continuity equation, finite `p`.
    E2_4,
    /// Continuity equation, sup norm.
    E2_5,
    /// General transport, finite `p`.
    E2_10,
    /// General transport, sup norm.
    E2_11,
    /// Manufacturing loop, finite `p`.
    E3_6,
    /// Manufacturing loop, sup norm.
    E3_7,
}

impl EstimateId {
    pub fn label(self) -> &'static str {
        match self {
            EstimateId::E2_4 => "E2.4",
            EstimateId::E2_5 => "E2.5",
            EstimateId::E2_10 => "E2.10",
            EstimateId::E2_11 => "E2.11",
            EstimateId::E3_6 => "E3.6",
            EstimateId::E3_7 => "E3.7",
        }
    }

    pub fn family(self) -> Family {
        match self {
            EstimateId::E2_4 | EstimateId::E2_5 => Family::Continuity,
            EstimateId::E2_10 | EstimateId::E2_11 => Family::Transport,
            EstimateId::E3_6 | EstimateId::E3_7 => Family::Manufacturing,
        }
    }

    pub fn parse(s: &str) -> Option<EstimateId> {
        let s = s.trim().trim_start_matches(['E', 'e']);
        Some(match s {
            "2.4" => EstimateId::E2_4,
            "2.5" => EstimateId::E2_5,
            "2.10" => EstimateId::E2_10,
            "2.11" => EstimateId::E2_11,
            "3.6" => EstimateId::E3_6,
            "3.7" => EstimateId::E3_7,
            _ => return None,
        })
    }

    /// Whether `μ` is admissible for this estimate at the given extremals.
    pub fn mu_valid(self, order: NormOrder, mu: f64, ext: &Extremals) -> bool {
        let q = order.reciprocal();
        let a = ext.a_max;
        match self {
            EstimateId::E2_4 => mu > 0.0 && mu > -q * ext.vmax - ext.vmin,
            EstimateId::E2_5 | EstimateId::E3_6 | EstimateId::E3_7 => mu > 0.0,
            EstimateId::E2_10 => mu >= 0.0 && mu > -a && mu > -q * ext.vmax - a - ext.vmin,
            EstimateId::E2_11 => mu >= 0.0 && mu > -a,
        }
    }
}

impl fmt::Display for EstimateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Problem class of a trajectory; selects the estimate per norm order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Continuity,
    Transport,
    Manufacturing,
}

impl Family {
    pub fn estimate(self, order: NormOrder) -> EstimateId {
        match (self, order.is_infinite()) {
            (Family::Continuity, false) => EstimateId::E2_4,
            (Family::Continuity, true) => EstimateId::E2_5,
            (Family::Transport, false) => EstimateId::E2_10,
            (Family::Transport, true) => EstimateId::E2_11,
            (Family::Manufacturing, false) => EstimateId::E3_6,
            (Family::Manufacturing, true) => EstimateId::E3_7,
        }
    }
}

/// `(expm1(z)/z)` with the removable singularity at 0 filled in.
fn expm1_ratio(z: f64) -> f64 {
    if z.abs() < 1e-12 {
        1.0 + 0.5 * z
    } else {
        libm::expm1(z) / z
    }
}

/// Boundary gain `(vmin·(e^{p(μ+A)/vmin} − 1)/(p(μ+A)))^{1/p}` for finite
/// `p` and `e^{(μ+A)/vmin}` for the sup norm.
pub fn boundary_coefficient(order: NormOrder, mu: f64, a: f64, vmin: f64) -> f64 {
    let c = mu + a;
    match order {
        NormOrder::Finite(p) => libm::pow(expm1_ratio(p * c / vmin), 1.0 / p),
        NormOrder::Infinity => libm::exp(c / vmin),
    }
}

/// The boundary gain without the `vmin` factor under the root.
pub fn boundary_coefficient_displayed(order: NormOrder, mu: f64, a: f64, vmin: f64) -> f64 {
    match order {
        NormOrder::Finite(p) => libm::pow(1.0 / vmin, 1.0 / p) * boundary_coefficient(order, mu, a, vmin),
        NormOrder::Infinity => boundary_coefficient(order, mu, a, vmin),
    }
}

/// Boundary gain of the closed loop: `((e^{pμr} − 1)/(pμr))^{1/p}` or
/// `e^{μr}`.
pub fn manufacturing_coefficient(order: NormOrder, mu: f64, r: f64) -> f64 {
    match order {
        NormOrder::Finite(p) => libm::pow(expm1_ratio(p * mu * r), 1.0 / p),
        NormOrder::Infinity => libm::exp(mu * r),
    }
}

/// Overshoot factor `exp(vmax·t/p)·h(t − 1/vmin)` of the initial-data term.
pub fn overshoot_factor(order: NormOrder, ext: &Extremals, t: f64) -> f64 {
    libm::exp(order.reciprocal() * ext.vmax * t) * heaviside_h(t - 1.0 / ext.vmin)
}

/// Bound `exp(max(0, vmax)/(p·vmin))` on the overshoot factor.
pub fn overshoot_bound(order: NormOrder, ext: &Extremals) -> f64 {
    libm::exp(order.reciprocal() * ext.vmax.max(0.0) / ext.vmin)
}

/// The three terms of a right-hand side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhsTerms {
    pub initial: f64,
    pub source: f64,
    pub boundary: f64,
    /// Boundary term with the displayed coefficient.
    pub boundary_displayed: f64,
}

impl RhsTerms {
    pub fn total(&self) -> f64 {
        self.initial + self.source + self.boundary
    }

    pub fn total_displayed(&self) -> f64 {
        self.initial + self.source + self.boundary_displayed
    }
}

/// `coefficient · memory`, with a vanishing memory taking precedence over
/// an overflowing coefficient.
fn weighted(coefficient: f64, memory: f64) -> f64 {
    if memory == 0.0 {
        0.0
    } else {
        coefficient * memory
    }
}

/// Right-hand side of the transport estimates at `t_k = k·dt`.
///
/// `f_norms[i]` is `‖f[t_i]‖` in the same order and `b_abs[i]` is `|b(t_i)|`.
#[allow(clippy::too_many_arguments)]
pub fn rhs_transport(
    order: NormOrder,
    mu: f64,
    k: usize,
    dt: f64,
    ext: &Extremals,
    phi_norm: f64,
    f_norms: &[f64],
    b_abs: &[f64],
) -> Result<RhsTerms> {
    rhs_general(EstimateId::E2_10, order, mu, k, dt, ext, phi_norm, f_norms, b_abs)
}

/// Right-hand side of the continuity estimates: the transport form with
/// `A ≡ 0` and `f = ∂v/∂x`.
#[allow(clippy::too_many_arguments)]
pub fn rhs_continuity(
    order: NormOrder,
    mu: f64,
    k: usize,
    dt: f64,
    ext: &Extremals,
    log_rho0_norm: f64,
    dvdx_norms: &[f64],
    b_abs: &[f64],
) -> Result<RhsTerms> {
    let ext = Extremals { a_max: 0.0, ..*ext };
    rhs_general(EstimateId::E2_4, order, mu, k, dt, &ext, log_rho0_norm, dvdx_norms, b_abs)
}

#[allow(clippy::too_many_arguments)]
fn rhs_general(
    finite_id: EstimateId,
    order: NormOrder,
    mu: f64,
    k: usize,
    dt: f64,
    ext: &Extremals,
    initial_norm: f64,
    f_norms: &[f64],
    b_abs: &[f64],
) -> Result<RhsTerms> {
    let id = finite_id.family().estimate(order);
    if !id.mu_valid(order, mu, ext) {
        return Err(Error::Precondition(alloc::format!(
            "mu = {mu} is not admissible for {id} at t = {} ({ext:?})",
            k as f64 * dt
        )));
    }
    let t = k as f64 * dt;
    let q = order.reciprocal();
    let (vmin, a) = (ext.vmin, ext.a_max);
    let window = (t - 1.0 / vmin).max(0.0);
    let initial = weighted(libm::exp((a + q * ext.vmax) * t) * heaviside_h(t - 1.0 / vmin), initial_norm);
    let source_coeff = libm::exp(1.0 + (mu + q * ext.vmax + a) / vmin) / vmin;
    let source = weighted(source_coeff, fading_memory_max(f_norms, dt, k, mu, window));
    let memory = fading_memory_max(b_abs, dt, k, mu, window);
    Ok(RhsTerms {
        initial,
        source,
        boundary: weighted(boundary_coefficient(order, mu, a, vmin), memory),
        boundary_displayed: weighted(boundary_coefficient_displayed(order, mu, a, vmin), memory),
    })
}

/// Right-hand side of the closed-loop estimates with terminal time `r`.
pub fn rhs_manufacturing(
    order: NormOrder,
    mu: f64,
    k: usize,
    dt: f64,
    r: f64,
    log_rho0_norm: f64,
    b_abs: &[f64],
) -> Result<RhsTerms> {
    if mu <= 0.0 {
        return Err(Error::Precondition(alloc::format!(
            "mu = {mu} is not admissible for the closed-loop estimates"
        )));
    }
    let t = k as f64 * dt;
    let memory = fading_memory_max(b_abs, dt, k, mu, (t - r).max(0.0));
    let boundary = weighted(manufacturing_coefficient(order, mu, r), memory);
    Ok(RhsTerms {
        initial: weighted(heaviside_h(t - r), log_rho0_norm),
        source: 0.0,
        boundary,
        boundary_displayed: boundary,
    })
}

/// Everything needed to certify one simulated trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory<'a> {
    pub family: Family,
    /// Density or transport state on the grid.
    pub state: &'a SolutionField,
    /// The same run with `nx/2` cells, for the discretisation indicator.
    pub coarse: Option<&'a SolutionField>,
    /// Source whose norms enter the second term (`f`, or `∂v/∂x`).
    pub source: Option<SpaceTimeField>,
    /// `b(t_k)` on the grid times.
    pub boundary: Vec<f64>,
    pub extremals: ExtremalTrace,
    /// Terminal time of the closed loop.
    pub terminal_time: Option<f64>,
}

impl<'a> Trajectory<'a> {
    pub fn continuity(problem: &ContinuityProblem, state: &'a SolutionField, coarse: Option<&'a SolutionField>) -> Self {
        let grid = state.grid();
        let v = problem.v.field().clone();
        let h = problem.v.fd_step();
        Trajectory {
            family: Family::Continuity,
            state,
            coarse,
            source: (!v.is_spatially_uniform()).then(|| SpaceTimeField::new(move |t, x| v.dx(t, x, h))),
            boundary: problem.b.samples(grid),
            extremals: ExtremalTrace::new(&problem.v, None, grid),
            terminal_time: None,
        }
    }

    pub fn transport(problem: &TransportProblem, state: &'a SolutionField, coarse: Option<&'a SolutionField>) -> Self {
        let grid = state.grid();
        Trajectory {
            family: Family::Transport,
            state,
            coarse,
            source: (!problem.coeffs.f.is_zero()).then(|| problem.coeffs.f.clone()),
            boundary: problem.b.samples(grid),
            extremals: ExtremalTrace::new(&problem.v, Some(&problem.coeffs.a), grid),
            terminal_time: None,
        }
    }

    pub fn manufacturing(
        state: &'a SolutionField,
        coarse: Option<&'a SolutionField>,
        boundary: Vec<f64>,
        velocity: &[f64],
        terminal_time: f64,
    ) -> Self {
        Trajectory {
            family: Family::Manufacturing,
            state,
            coarse,
            source: None,
            boundary,
            extremals: ExtremalTrace::from_uniform_velocity(velocity),
            terminal_time: Some(terminal_time),
        }
    }

    /// Left-hand side norm of one row of a field.
    pub fn lhs(&self, field: &SolutionField, k: usize, order: NormOrder) -> Result<f64> {
        match field.quantity() {
            Quantity::Density { rho_s } => log_norm(field.row(k), rho_s, order),
            Quantity::State => Ok(norm(field.row(k), order)),
        }
    }
}

/// Outcome of a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// No time at which `μ` is admissible.
    NotApplicable,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::NotApplicable => "not-applicable",
        }
    }
}

/// One grid time of a certificate. `rhs` is `None` where `μ` is not
/// admissible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateCell {
    pub t: f64,
    pub lhs: f64,
    pub rhs: Option<f64>,
    pub rhs_displayed: Option<f64>,
    pub slack: f64,
}

impl CertificateCell {
    pub fn margin(&self) -> Option<f64> {
        self.rhs.map(|r| r - self.lhs)
    }

    pub fn passes(&self) -> Option<bool> {
        self.margin().map(|m| m >= -self.slack)
    }
}

/// Pass/fail record of one estimate for one `(p, μ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCertificate {
    pub estimate: EstimateId,
    pub order: NormOrder,
    pub mu: f64,
    pub cells: Vec<CertificateCell>,
    pub verdict: Verdict,
}

impl BoundCertificate {
    /// Smallest margin over admissible times.
    pub fn worst_margin(&self) -> Option<f64> {
        self.cells.iter().filter_map(CertificateCell::margin).reduce(f64::min)
    }

    /// Whether `μ` was admissible at every time.
    pub fn mu_valid_everywhere(&self) -> bool {
        self.cells.iter().all(|c| c.rhs.is_some())
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Certifies `lhs ≤ rhs + slack` at every grid time for each `(p, μ)`.
pub fn certify(traj: &Trajectory<'_>, orders: &[NormOrder], mus: &[f64]) -> Result<Vec<BoundCertificate>> {
    let grid = *traj.state.grid();
    let (rows, dt) = (grid.rows(), grid.dt());
    if traj.coarse.is_some_and(|c| c.grid().rows() != rows) {
        return Err(Error::InvalidInput("coarse companion must share the time grid".into()));
    }
    if traj.family == Family::Manufacturing && traj.terminal_time.is_none() {
        return Err(Error::InvalidInput("closed-loop certificates need the terminal time".into()));
    }
    let b_abs: Vec<f64> = traj.boundary.iter().map(|b| b.abs()).collect();
    let mut source_rows: Vec<Vec<f64>> = alloc::vec![Vec::with_capacity(rows); orders.len()];
    let mut samples = Vec::with_capacity(grid.nodes());
    for k in 0..rows {
        match &traj.source {
            None => source_rows.iter_mut().for_each(|s| s.push(0.0)),
            Some(f) => {
                samples.clear();
                samples.extend(grid.xs().map(|x| f.eval(grid.t(k), x)));
                for (s, &o) in source_rows.iter_mut().zip(orders) {
                    s.push(norm(&samples, o));
                }
            }
        }
    }
    let mut out = Vec::with_capacity(orders.len() * mus.len());
    for (oi, &order) in orders.iter().enumerate() {
        let estimate = traj.family.estimate(order);
        let lhs: Vec<f64> = (0..rows).map(|k| traj.lhs(traj.state, k, order)).collect::<Result<_>>()?;
        let slack: Vec<f64> = match traj.coarse {
            Some(c) => (0..rows)
                .map(|k| Ok(BASE_SLACK + INDICATOR_WEIGHT * (lhs[k] - traj.lhs(c, k, order)?).abs()))
                .collect::<Result<_>>()?,
            None => alloc::vec![BASE_SLACK; rows],
        };
        let initial_norm = lhs[0];
        for &mu in mus {
            let mut cells = Vec::with_capacity(rows);
            for k in 0..rows {
                let ext = traj.extremals.at(k);
                let terms = match traj.family {
                    Family::Manufacturing => {
                        let r = traj.terminal_time.unwrap_or_default();
                        rhs_manufacturing(order, mu, k, dt, r, initial_norm, &b_abs).ok()
                    }
                    Family::Continuity => {
                        rhs_continuity(order, mu, k, dt, &ext, initial_norm, &source_rows[oi], &b_abs).ok()
                    }
                    Family::Transport => {
                        rhs_transport(order, mu, k, dt, &ext, initial_norm, &source_rows[oi], &b_abs).ok()
                    }
                };
                cells.push(CertificateCell {
                    t: grid.t(k),
                    lhs: lhs[k],
                    rhs: terms.map(|r| r.total()),
                    rhs_displayed: terms.map(|r| r.total_displayed()),
                    slack: slack[k],
                });
            }
            let verdict = if cells.iter().all(|c| c.rhs.is_none()) {
                Verdict::NotApplicable
            } else if cells.iter().all(|c| c.passes() != Some(false)) {
                Verdict::Pass
            } else {
                Verdict::Fail
            };
            out.push(BoundCertificate {
                estimate,
                order,
                mu,
                cells,
                verdict,
            });
        }
    }
    Ok(out)
}

/// One row of the boundary-gain experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainRow {
    pub order: NormOrder,
    pub mu: f64,
    pub c: f64,
    /// Measured `‖ln(ρ/ρs)‖` at the final time.
    pub lhs: f64,
    pub rhs: f64,
    /// Boundary coefficient at the final time.
    pub coefficient: f64,
    /// `rhs / lhs`, which the coefficient bounds from above.
    pub ratio: f64,
}

/// Constant velocity `vs`, boundary `b ≡ c` and initial density
/// `ρs·e^c`: the state stays at `|c|`, so `rhs/lhs` measures the boundary
/// gain. Evaluated at the last grid time, which must be `≥ 1/vs`.
pub fn gain_experiment(
    vs: f64,
    c: f64,
    rho_s: f64,
    orders: &[NormOrder],
    mus: &[f64],
    grid: &Grid,
) -> Result<Vec<GainRow>> {
    let k = grid.steps();
    if grid.t(k) < 1.0 / vs {
        return Err(Error::InvalidInput(alloc::format!(
            "gain experiment needs a horizon of at least 1/vs = {}",
            1.0 / vs
        )));
    }
    let v = VelocityField::new(SpaceTimeField::constant(vs), grid)?;
    let problem = ContinuityProblem::new(
        rho_s,
        InitialProfile::density(crate::ScalarProfile::constant(rho_s * libm::exp(c)), grid)?,
        BoundarySignal::new(ScalarSignal::constant(c), grid)?,
        v,
    )?;
    let rho = solve_continuity(&problem, grid);
    let traj = Trajectory::continuity(&problem, &rho, None);
    let mut rows = Vec::new();
    for cert in certify(&traj, orders, mus)? {
        let cell = cert.cells[k];
        let rhs = cell.rhs.unwrap_or(f64::NAN);
        rows.push(GainRow {
            order: cert.order,
            mu: cert.mu,
            c,
            lhs: cell.lhs,
            rhs,
            coefficient: boundary_coefficient(cert.order, cert.mu, 0.0, vs),
            ratio: rhs / cell.lhs,
        });
    }
    Ok(rows)
}

/// Gains of the decreasing (`v1`) and increasing (`v2`) linear velocities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasReport {
    pub theta: f64,
    pub p: f64,
    /// `(1/(1−θ))·(∫(−ln(1+(θ−1)x))^p dx)^{1/p}`.
    pub gamma1: f64,
    /// `(1/(1−θ))·(∫(ln(1+(θ^{−1}−1)x))^p dx)^{1/p}`.
    pub gamma2: f64,
    /// The integrals without the root and prefactor.
    pub integral1: RichardsonEstimate,
    pub integral2: RichardsonEstimate,
    /// Change of each gain when its integral is replaced by the
    /// Richardson extrapolation.
    pub gamma1_error: f64,
    pub gamma2_error: f64,
    /// `‖ln(ρ/ρs)‖_p / ‖∂v/∂x‖_p` measured on the simulated stationary
    /// states at the final grid time.
    pub measured1: f64,
    pub measured2: f64,
}

/// Number of trapezoid panels of the bias integrals.
pub const BIAS_PANELS: usize = 10_000;

pub fn bias_experiment(theta: f64, p: f64, grid: &Grid) -> Result<BiasReport> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidInput(alloc::format!("theta must lie in (0, 1) (got {theta})")));
    }
    let order = NormOrder::finite(p)?;
    let scale = 1.0 / (1.0 - theta);
    let gamma = |i: f64| scale * libm::pow(i, 1.0 / p);
    let i1 = trapezoid_richardson(|x| libm::pow(-libm::log1p((theta - 1.0) * x), p), 0.0, 1.0, BIAS_PANELS);
    let i2 = trapezoid_richardson(|x| libm::pow(libm::log1p((1.0 / theta - 1.0) * x), p), 0.0, 1.0, BIAS_PANELS);

    let measure = |v: SpaceTimeField| -> Result<f64> {
        let v = VelocityField::new(v, grid)?;
        let rho0 = equilibrium_profile(1.0, 0.0, &v)?;
        let problem = ContinuityProblem::new(
            1.0,
            InitialProfile::density(rho0, grid)?,
            BoundarySignal::new(ScalarSignal::zero(), grid)?,
            v.clone(),
        )?;
        let rho = solve_continuity(&problem, grid);
        let k = grid.steps();
        let lhs = log_norm(rho.row(k), 1.0, order)?;
        let slope: Vec<f64> = grid.xs().map(|x| v.dvdx(grid.t(k), x)).collect();
        Ok(lhs / norm(&slope, order))
    };
    let v1 = SpaceTimeField::new(move |_, x| 1.0 + (theta - 1.0) * x);
    let v2 = SpaceTimeField::new(move |_, x| theta + (1.0 - theta) * x);
    Ok(BiasReport {
        theta,
        p,
        gamma1: gamma(i1.value),
        gamma2: gamma(i2.value),
        integral1: i1,
        integral2: i2,
        gamma1_error: (gamma(i1.value) - gamma(i1.extrapolated)).abs(),
        gamma2_error: (gamma(i2.value) - gamma(i2.extrapolated)).abs(),
        measured1: measure(v1)?,
        measured2: measure(v2)?,
    })
}
