//! Validated problem data for the continuity and transport problems,
//! and the corner compatibility checks at `(t, x) = (0, 0)`.

use alloc::string::String;
use alloc::vec::Vec;

use crate::grid::Grid;
use crate::signal::{ScalarProfile, ScalarSignal, SpaceTimeField, FD_STEP};
use crate::{Error, Result};

/// Default tolerance of the compatibility residuals.
pub const COMPATIBILITY_TOL: f64 = 1e-8;

/// Largest node count whose samples are kept after validation.
const NODE_CACHE_LIMIT: usize = 1 << 23;

/// Samples of a field on every node of the grid it was validated on,
/// row-major in time.
#[derive(Debug, Clone)]
struct NodeTable {
    grid: Grid,
    values: Vec<f64>,
}

impl NodeTable {
    fn recorder(grid: &Grid, enabled: bool) -> Option<NodeTable> {
        let n = grid.rows() * grid.nodes();
        (enabled && n <= NODE_CACHE_LIMIT).then(|| NodeTable {
            grid: *grid,
            values: Vec::with_capacity(n),
        })
    }

    fn row(&self, grid: &Grid, k: usize) -> Option<&[f64]> {
        if self.grid != *grid || k >= grid.rows() {
            return None;
        }
        let n = grid.nodes();
        Some(&self.values[k * n..(k + 1) * n])
    }
}

/// A velocity that is strictly positive on every node of a grid.
#[derive(Debug, Clone)]
pub struct VelocityField {
    field: SpaceTimeField,
    row_min: Vec<f64>,
    row_max: Vec<f64>,
    nodes: Option<NodeTable>,
    fd_step: f64,
}

impl VelocityField {
    /// Samples `v` on every grid node; a non-positive or non-finite
    /// sample is an error.
    pub fn new(field: SpaceTimeField, grid: &Grid) -> Result<VelocityField> {
        let mut row_min = Vec::with_capacity(grid.rows());
        let mut row_max = Vec::with_capacity(grid.rows());
        let uniform = field.is_spatially_uniform();
        let mut nodes = NodeTable::recorder(grid, !uniform);
        for k in 0..grid.rows() {
            let t = grid.t(k);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for j in 0..grid.nodes() {
                let x = grid.x(j);
                let v = field.eval(t, x);
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        what: "velocity",
                        t,
                        x,
                    });
                }
                if v <= 0.0 {
                    return Err(Error::NonPositiveVelocity { t, x, value: v });
                }
                lo = lo.min(v);
                hi = hi.max(v);
                if let Some(table) = nodes.as_mut() {
                    table.values.push(v);
                }
                if uniform {
                    break;
                }
            }
            row_min.push(lo);
            row_max.push(hi);
        }
        Ok(VelocityField {
            field,
            row_min,
            row_max,
            nodes,
            fd_step: FD_STEP,
        })
    }

    /// Overrides the finite-difference step used for `∂v/∂x`.
    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    pub fn field(&self) -> &SpaceTimeField {
        &self.field
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.field.eval(t, x)
    }

    /// `∂v/∂x` by central differences.
    #[inline]
    pub fn dvdx(&self, t: f64, x: f64) -> f64 {
        self.field.dx(t, x, self.fd_step)
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    /// Minimum of `v` on each grid row.
    pub fn row_min(&self) -> &[f64] {
        &self.row_min
    }

    pub fn row_max(&self) -> &[f64] {
        &self.row_max
    }

    pub fn min(&self) -> f64 {
        self.row_min.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `v` on row `k` of `grid`, if it was sampled there during validation.
    pub fn node_row(&self, grid: &Grid, k: usize) -> Option<&[f64]> {
        self.nodes.as_ref()?.row(grid, k)
    }

    pub fn max(&self) -> f64 {
        self.row_max.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Running minimum `min{v(s, x) : s ≤ t_k}` over grid nodes.
    pub fn running_min(&self) -> Vec<f64> {
        let mut m = f64::INFINITY;
        self.row_min
            .iter()
            .map(|&r| {
                m = m.min(r);
                m
            })
            .collect()
    }
}

/// Boundary disturbance `b(t)`, finite on every grid time.
#[derive(Debug, Clone)]
pub struct BoundarySignal {
    signal: ScalarSignal,
    fd_step: f64,
}

impl BoundarySignal {
    pub fn new(signal: ScalarSignal, grid: &Grid) -> Result<BoundarySignal> {
        for t in grid.times() {
            if !signal.eval(t).is_finite() {
                return Err(Error::NonFinite {
                    what: "boundary signal",
                    t,
                    x: 0.0,
                });
            }
        }
        Ok(BoundarySignal {
            signal,
            fd_step: FD_STEP,
        })
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    /// Another signal with the same derivative settings.
    pub fn with_signal(&self, signal: ScalarSignal) -> BoundarySignal {
        BoundarySignal {
            signal,
            fd_step: self.fd_step,
        }
    }

    pub fn signal(&self) -> &ScalarSignal {
        &self.signal
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        self.signal.eval(t)
    }

    /// One-sided `db/dt` at `t`.
    pub fn rate(&self, t: f64) -> f64 {
        self.signal.forward_derivative(t, self.fd_step)
    }

    /// Samples on the grid times.
    pub fn samples(&self, grid: &Grid) -> Vec<f64> {
        grid.times().map(|t| self.eval(t)).collect()
    }
}

/// Initial data `ρ0` or `φ`, with the interior points where it may jump.
#[derive(Debug, Clone)]
pub struct InitialProfile {
    profile: ScalarProfile,
    jump_points: Vec<f64>,
    fd_step: f64,
}

impl InitialProfile {
    /// A piecewise-C¹ profile with jumps at `jump_points`, which must be
    /// strictly increasing and lie in `(0, 1)`.
    pub fn new(profile: ScalarProfile, jump_points: Vec<f64>, grid: &Grid) -> Result<InitialProfile> {
        let mut problems: Vec<String> = Vec::new();
        for (i, &xi) in jump_points.iter().enumerate() {
            if !(xi > 0.0 && xi < 1.0) {
                problems.push(alloc::format!("jump point {xi} is not interior to (0, 1)"));
            }
            if i > 0 && xi <= jump_points[i - 1] {
                problems.push(alloc::format!(
                    "jump points must be strictly increasing ({} then {xi})",
                    jump_points[i - 1]
                ));
            }
        }
        for x in grid.xs() {
            if !profile.eval(x).is_finite() {
                problems.push(alloc::format!("initial profile is not finite at x = {x}"));
                break;
            }
        }
        if !problems.is_empty() {
            return Err(Error::InvalidInput(problems.join("; ")));
        }
        Ok(InitialProfile {
            profile,
            jump_points,
            fd_step: FD_STEP,
        })
    }

    /// A C¹ profile that is strictly positive on the grid, as required of
    /// a density.
    pub fn density(profile: ScalarProfile, grid: &Grid) -> Result<InitialProfile> {
        for x in grid.xs() {
            let r = profile.eval(x);
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidInput(alloc::format!(
                    "initial density must be positive and finite (value {r} at x = {x})"
                )));
            }
        }
        InitialProfile::new(profile, Vec::new(), grid)
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    /// Another profile on the same jump points.
    pub fn with_profile(&self, profile: ScalarProfile) -> InitialProfile {
        InitialProfile {
            profile,
            jump_points: self.jump_points.clone(),
            fd_step: self.fd_step,
        }
    }

    pub fn profile(&self) -> &ScalarProfile {
        &self.profile
    }

    pub fn jump_points(&self) -> &[f64] {
        &self.jump_points
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.profile.eval(x)
    }

    /// One-sided derivative at `x`, looking right.
    pub fn slope(&self, x: f64) -> f64 {
        self.profile.forward_derivative(x, self.fd_step)
    }

    pub fn samples(&self, grid: &Grid) -> Vec<f64> {
        grid.xs().map(|x| self.eval(x)).collect()
    }
}

/// Coefficients `a` and `f` of `w_t + v w_x = a w + f`.
#[derive(Debug, Clone)]
pub struct TransportCoefficients {
    pub a: SpaceTimeField,
    pub f: SpaceTimeField,
    a_nodes: Option<NodeTable>,
    f_nodes: Option<NodeTable>,
}

impl TransportCoefficients {
    pub fn new(a: SpaceTimeField, f: SpaceTimeField, grid: &Grid) -> Result<TransportCoefficients> {
        let mut tables = [None, None];
        for ((name, field), table) in [("coefficient a", &a), ("source f", &f)].into_iter().zip(&mut tables) {
            if field.as_constant().is_some_and(f64::is_finite) {
                continue;
            }
            *table = NodeTable::recorder(grid, true);
            for k in 0..grid.rows() {
                let t = grid.t(k);
                for x in grid.xs() {
                    let value = field.eval(t, x);
                    if !value.is_finite() {
                        return Err(Error::NonFinite { what: name, t, x });
                    }
                    if let Some(table) = table.as_mut() {
                        table.values.push(value);
                    }
                }
            }
        }
        let [a_nodes, f_nodes] = tables;
        Ok(TransportCoefficients { a, f, a_nodes, f_nodes })
    }

    /// `a` on row `k` of `grid`, if it was sampled there during validation.
    pub fn a_row(&self, grid: &Grid, k: usize) -> Option<&[f64]> {
        self.a_nodes.as_ref()?.row(grid, k)
    }

    /// `f` on row `k` of `grid`, if it was sampled there during validation.
    pub fn f_row(&self, grid: &Grid, k: usize) -> Option<&[f64]> {
        self.f_nodes.as_ref()?.row(grid, k)
    }

    pub fn zero() -> TransportCoefficients {
        TransportCoefficients::unchecked(SpaceTimeField::zero(), SpaceTimeField::zero())
    }

    /// Coefficients derived from already validated data.
    pub(crate) fn unchecked(a: SpaceTimeField, f: SpaceTimeField) -> TransportCoefficients {
        TransportCoefficients {
            a,
            f,
            a_nodes: None,
            f_nodes: None,
        }
    }
}

/// Regularity implied by the corner data of the transport problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularity {
    /// `φ ∈ C¹`, `b(0) = φ(0)` and the first-order condition holds.
    C1,
    /// `φ` continuous and `b(0) = φ(0)`.
    C0,
    /// Only piecewise C¹ on each time slice, with jumps along the loci.
    PiecewiseC1,
}

impl Regularity {
    pub fn label(self) -> &'static str {
        match self {
            Regularity::C1 => "C1",
            Regularity::C0 => "C0",
            Regularity::PiecewiseC1 => "PC1",
        }
    }
}

/// Residuals of the two corner conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompatibilityReport {
    /// Zeroth order: boundary and initial values agree at the corner.
    pub value_residual: f64,
    /// First order: the PDE holds at the corner.
    pub slope_residual: f64,
    pub tolerance: f64,
    pub regularity: Regularity,
}

impl CompatibilityReport {
    pub fn value_ok(&self) -> bool {
        self.value_residual <= self.tolerance
    }

    pub fn slope_ok(&self) -> bool {
        self.slope_residual <= self.tolerance
    }

    pub fn passes(&self) -> bool {
        self.value_ok() && self.slope_ok()
    }
}

fn classify(value_ok: bool, slope_ok: bool, has_jumps: bool) -> Regularity {
    match (value_ok, slope_ok, has_jumps) {
        (true, true, false) => Regularity::C1,
        (true, false, false) => Regularity::C0,
        _ => Regularity::PiecewiseC1,
    }
}

/// Corner conditions of the continuity problem:
/// `ρs·exp(b(0)) = ρ0(0)` and `∂v/∂x(0,0) = −ḃ(0) − v(0,0)·ρ0′(0)/ρ0(0)`.
pub fn check_compatibility_continuity(
    rho_s: f64,
    rho0: &InitialProfile,
    b: &BoundarySignal,
    v: &VelocityField,
    tolerance: f64,
) -> CompatibilityReport {
    let r00 = rho0.eval(0.0);
    let value_residual = (rho_s * libm::exp(b.eval(0.0)) - r00).abs();
    let dvdx = v.field().dx_forward(0.0, 0.0, v.fd_step());
    let slope_residual = (dvdx + b.rate(0.0) + v.eval(0.0, 0.0) * rho0.slope(0.0) / r00).abs();
    let regularity = classify(
        value_residual <= tolerance,
        slope_residual <= tolerance,
        !rho0.jump_points().is_empty(),
    );
    CompatibilityReport {
        value_residual,
        slope_residual,
        tolerance,
        regularity,
    }
}

/// Corner conditions of the transport problem:
/// `b(0) = φ(0)` and `ḃ(0) + v(0,0)·φ′(0) = a(0,0)·b(0) + f(0,0)`.
pub fn check_compatibility_transport(
    phi: &InitialProfile,
    b: &BoundarySignal,
    v: &VelocityField,
    coeffs: &TransportCoefficients,
    tolerance: f64,
) -> CompatibilityReport {
    let b0 = b.eval(0.0);
    let value_residual = (b0 - phi.eval(0.0)).abs();
    let slope_residual = (b.rate(0.0) + v.eval(0.0, 0.0) * phi.slope(0.0)
        - coeffs.a.eval(0.0, 0.0) * b0
        - coeffs.f.eval(0.0, 0.0))
    .abs();
    let regularity = classify(
        value_residual <= tolerance,
        slope_residual <= tolerance,
        !phi.jump_points().is_empty(),
    );
    CompatibilityReport {
        value_residual,
        slope_residual,
        tolerance,
        regularity,
    }
}
