//! Uniform space-time sampling grid on `[0, horizon] × [0, 1]`.

use crate::{Error, Result};

/// `nx` uniform cells in space (so `nx + 1` nodes, `Δx = 1/nx`) and a
/// fixed time step `dt` up to `horizon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    dt: f64,
    horizon: f64,
    steps: usize,
}

impl Grid {
    pub fn new(nx: usize, dt: f64, horizon: f64) -> Result<Grid> {
        let mut problems = alloc::vec::Vec::new();
        if nx < 2 {
            problems.push(alloc::format!("nx must be at least 2 (got {nx})"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            problems.push(alloc::format!("dt must be positive (got {dt})"));
        }
        if !(horizon >= 0.0 && horizon.is_finite()) {
            problems.push(alloc::format!("horizon must be non-negative (got {horizon})"));
        }
        if !problems.is_empty() {
            return Err(Error::InvalidInput(problems.join("; ")));
        }
        let ratio = horizon / dt;
        let nearest = libm::round(ratio);
        let steps = if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest
        } else {
            libm::ceil(ratio)
        } as usize;
        Ok(Grid {
            nx,
            dt,
            horizon,
            steps,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of time steps; there are `steps + 1` time rows.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn rows(&self) -> usize {
        self.steps + 1
    }

    pub fn nodes(&self) -> usize {
        self.nx + 1
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        if j == self.nx {
            1.0
        } else {
            j as f64 / self.nx as f64
        }
    }

    #[inline]
    pub fn t(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.nx).map(move |j| self.x(j))
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |k| self.t(k))
    }

    /// Index of the grid time closest to `t`.
    pub fn row_of(&self, t: f64) -> usize {
        let k = libm::round(t / self.dt);
        (k.max(0.0) as usize).min(self.steps)
    }

    /// The same time sampling with half as many cells, whose nodes are a
    /// subset of this grid's nodes. `None` when `nx` is odd or below 4.
    pub fn coarsened(&self) -> Option<Grid> {
        (self.nx.is_multiple_of(2) && self.nx >= 4).then_some(Grid {
            nx: self.nx / 2,
            ..*self
        })
    }

    /// Same time step and horizon with a different spatial resolution.
    pub fn with_nx(&self, nx: usize) -> Result<Grid> {
        Grid::new(nx, self.dt, self.horizon)
    }

    /// Courant number `dt·vmax/Δx`.
    pub fn courant(&self, vmax: f64) -> f64 {
        self.dt * vmax * self.nx as f64
    }

    /// Checks `dt ≤ cfl_fraction · Δx / vmax`.
    pub fn check_cfl(&self, vmax: f64, cfl_fraction: f64) -> Result<()> {
        if !(cfl_fraction > 0.0 && cfl_fraction <= 1.0) {
            return Err(Error::InvalidInput(alloc::format!(
                "cfl fraction must lie in (0, 1] (got {cfl_fraction})"
            )));
        }
        let courant = self.courant(vmax);
        if courant > cfl_fraction * (1.0 + 1e-12) {
            return Err(Error::Cfl {
                courant,
                limit: cfl_fraction,
            });
        }
        Ok(())
    }
}
