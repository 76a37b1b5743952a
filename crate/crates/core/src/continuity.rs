//! The continuity equation `ρ_t + (ρ v)_x = 0` with `ρ(t, 0) = ρs·e^{b(t)}`,
//! solved through `w = ln(ρ/ρs)`, which obeys
//! `w_t + v w_x = −∂v/∂x` with `w(t, 0) = b(t)`.

use crate::fields::{BoundarySignal, InitialProfile, TransportCoefficients, VelocityField};
use crate::grid::Grid;
use crate::signal::{ScalarProfile, SpaceTimeField};
use crate::transport::{solve_field, Quantity, SolutionField, TransportProblem};
use crate::{Error, Result};

/// Validated data of the continuity problem.
#[derive(Debug, Clone)]
pub struct ContinuityProblem {
    pub rho_s: f64,
    pub rho0: InitialProfile,
    pub b: BoundarySignal,
    pub v: VelocityField,
}

impl ContinuityProblem {
    pub fn new(rho_s: f64, rho0: InitialProfile, b: BoundarySignal, v: VelocityField) -> Result<ContinuityProblem> {
        if !(rho_s > 0.0 && rho_s.is_finite()) {
            return Err(Error::InvalidInput(alloc::format!(
                "rho_s must be positive (got {rho_s})"
            )));
        }
        if !rho0.jump_points().is_empty() {
            return Err(Error::InvalidInput("initial density must not have jump points".into()));
        }
        Ok(ContinuityProblem { rho_s, rho0, b, v })
    }

    /// The equivalent transport problem for `w = ln(ρ/ρs)`.
    pub fn to_transport(&self) -> TransportProblem {
        let rho_s = self.rho_s;
        let rho0 = self.rho0.profile().clone();
        let phi = ScalarProfile::new(move |x| libm::log(rho0.eval(x) / rho_s));
        TransportProblem::new(
            self.v.clone(),
            self.rho0.with_profile(phi),
            self.b.clone(),
            TransportCoefficients::unchecked(SpaceTimeField::zero(), source_field(&self.v)),
        )
    }
}

/// `f = −∂v/∂x` by central differences with the velocity's step.
pub fn source_field(v: &VelocityField) -> SpaceTimeField {
    if v.field().is_spatially_uniform() {
        return SpaceTimeField::zero();
    }
    let field = v.field().clone();
    let h = v.fd_step();
    SpaceTimeField::new(move |t, x| -field.dx(t, x, h))
}

/// `ρ = ρs·e^w` on every grid node.
pub fn solve_continuity(problem: &ContinuityProblem, grid: &Grid) -> SolutionField {
    let rho_s = problem.rho_s;
    solve_field(&problem.to_transport(), grid).map(Quantity::Density { rho_s }, |w| rho_s * libm::exp(w))
}

/// Stationary profile `ρ(x) = ρs·e^b·v(0)/v(x)` of a time-invariant
/// velocity.
pub fn equilibrium_profile(rho_s: f64, b: f64, v: &VelocityField) -> Result<ScalarProfile> {
    const PROBES: usize = 64;
    for i in 0..=PROBES {
        let x = i as f64 / PROBES as f64;
        let (v0, v1) = (v.eval(0.0, x), v.eval(1.0, x));
        if (v0 - v1).abs() > 1e-12 {
            return Err(Error::Precondition(alloc::format!(
                "velocity is not time-invariant: v(0, {x}) = {v0} but v(1, {x}) = {v1}"
            )));
        }
    }
    let field = v.field().clone();
    let scale = rho_s * libm::exp(b) * field.eval(0.0, 0.0);
    Ok(ScalarProfile::new(move |x| scale / field.eval(0.0, x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::ScalarSignal;

    fn setup(grid: &Grid, rho_s: f64, v: &str, b: &str, rho0: ScalarProfile) -> ContinuityProblem {
        let v = VelocityField::new(SpaceTimeField::parse(v).unwrap(), grid).unwrap();
        let b = BoundarySignal::new(ScalarSignal::parse(b).unwrap(), grid).unwrap();
        let rho0 = InitialProfile::density(rho0, grid).unwrap();
        ContinuityProblem::new(rho_s, rho0, b, v).unwrap()
    }

    #[test]
    fn constant_equilibria() {
        let grid = Grid::new(50, 0.01, 2.0).unwrap();
        let p = setup(&grid, 1.0, "1", "0", ScalarProfile::constant(1.0));
        assert!(solve_continuity(&p, &grid).values().iter().all(|&r| r == 1.0));
        let c = libm::exp(0.1);
        let p = setup(&grid, 1.0, "1", "0.1", ScalarProfile::constant(c));
        let rho = solve_continuity(&p, &grid);
        assert!(rho.values().iter().all(|&r| (r - c).abs() < 1e-14));
    }

    #[test]
    fn shaped_equilibrium_is_stationary() {
        let grid = Grid::new(100, 0.005, 2.0).unwrap();
        let p = setup(&grid, 1.0, "1 + x", "0", ScalarProfile::parse("1/(1+x)").unwrap());
        let rho = solve_continuity(&p, &grid);
        for k in 0..grid.rows() {
            for (j, x) in grid.xs().enumerate() {
                assert!((rho.value(k, j) - 1.0 / (1.0 + x)).abs() < 1e-6, "k={k} j={j}");
            }
        }
        assert!(rho.values().iter().all(|&r| r > 0.0));
    }

    #[test]
    fn equilibrium_examples() {
        let grid = Grid::new(10, 0.1, 1.0).unwrap();
        let v = |s: &str| VelocityField::new(SpaceTimeField::parse(s).unwrap(), &grid).unwrap();
        let e = equilibrium_profile(1.0, 0.0, &v("1")).unwrap();
        assert_eq!(e.eval(0.3), 1.0);
        let e = equilibrium_profile(1.0, 0.0, &v("1 + x")).unwrap();
        assert!((e.eval(0.5) - 1.0 / 1.5).abs() < 1e-15);
        let e = equilibrium_profile(2.0, libm::log(3.0), &v("2 - x")).unwrap();
        assert!((e.eval(0.5) - 12.0 / 1.5).abs() < 1e-12);
        assert!(equilibrium_profile(1.0, 0.0, &v("1 + t*x")).is_err());
    }

    #[test]
    fn jumps_rejected() {
        let grid = Grid::new(10, 0.1, 1.0).unwrap();
        let rho0 = InitialProfile::new(ScalarProfile::constant(1.0), alloc::vec![0.5], &grid).unwrap();
        let v = VelocityField::new(SpaceTimeField::constant(1.0), &grid).unwrap();
        let b = BoundarySignal::new(ScalarSignal::zero(), &grid).unwrap();
        assert!(ContinuityProblem::new(1.0, rho0, b, v).is_err());
    }
}
