//! First-order upwind scheme for `w_t + v w_x = a w + f`, kept
//! independent of the characteristic solver so that agreement between
//! the two is meaningful.
//!
//! ```text
//! w_j^{n+1} = w_j^n − (dt/Δx)·v(t_n, x_j)·(w_j^n − w_{j−1}^n) + dt·(a w_j^n + f)
//! ```
//!
//! with the inflow node set to `b(t_{n+1})`.

use alloc::vec::Vec;

use crate::grid::Grid;
use crate::transport::{Component, Quantity, SolutionField, TransportProblem};
use crate::Result;

/// Row-by-row upwind solver.
#[derive(Debug)]
pub struct UpwindStepper<'a> {
    problem: &'a TransportProblem,
    grid: Grid,
    next_row: usize,
    current: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> UpwindStepper<'a> {
    /// Fails if `dt·max v/Δx > 1`.
    pub fn new(problem: &'a TransportProblem, grid: Grid) -> Result<UpwindStepper<'a>> {
        grid.check_cfl(problem.v.max(), 1.0)?;
        Ok(UpwindStepper {
            problem,
            grid,
            next_row: 0,
            current: grid.xs().map(|x| problem.phi.eval(x)).collect(),
            scratch: Vec::with_capacity(grid.nodes()),
        })
    }

    fn step(&mut self, n: usize) {
        let g = self.grid;
        let (t, t1) = (g.t(n), g.t(n + 1));
        let dt = t1 - t;
        let ratio = dt / g.dx();
        let p = self.problem;
        self.scratch.clear();
        self.scratch.push(p.b.eval(t1));
        // Node samples kept from validation stand in for re-evaluation.
        let (v_row, a_row, f_row) = (p.v.node_row(&g, n), p.coeffs.a_row(&g, n), p.coeffs.f_row(&g, n));
        let at = |row: Option<&[f64]>, j: usize, eval: &dyn Fn() -> f64| row.map_or_else(eval, |r| r[j]);
        for j in 1..g.nodes() {
            let x = g.x(j);
            let w = self.current[j];
            let v = at(v_row, j, &|| p.v.eval(t, x));
            let a = at(a_row, j, &|| p.coeffs.a.eval(t, x));
            let f = at(f_row, j, &|| p.coeffs.f.eval(t, x));
            let flux = ratio * v * (w - self.current[j - 1]);
            let react = dt * (a * w + f);
            self.scratch.push(w - flux + react);
        }
        core::mem::swap(&mut self.current, &mut self.scratch);
    }
}

impl Iterator for UpwindStepper<'_> {
    type Item = (usize, Vec<f64>);

    fn next(&mut self) -> Option<(usize, Vec<f64>)> {
        let k = self.next_row;
        if k > self.grid.steps() {
            return None;
        }
        if k > 0 {
            self.step(k - 1);
        }
        self.next_row += 1;
        Some((k, self.current.clone()))
    }
}

/// The upwind solution on every grid node.
pub fn upwind_solve(problem: &TransportProblem, grid: &Grid) -> Result<SolutionField> {
    let mut values = Vec::with_capacity(grid.rows() * grid.nodes());
    for (_, row) in UpwindStepper::new(problem, *grid)? {
        values.extend_from_slice(&row);
    }
    Ok(SolutionField::from_rows(*grid, values, Component::Full, Quantity::State))
}
