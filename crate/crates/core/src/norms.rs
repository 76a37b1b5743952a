//! State norms, velocity extremals and the fading-memory maxima used by
//! every stability estimate.

use alloc::vec::Vec;
use core::fmt;

use crate::grid::Grid;
use crate::quadrature::trapezoid_unit;
use crate::signal::SpaceTimeField;
use crate::{Error, Result};
use crate::fields::VelocityField;

/// Norm selector: a finite `p > 1` or the sup norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormOrder {
    Finite(f64),
    Infinity,
}

impl NormOrder {
    /// A finite order; `p` must exceed 1.
    pub fn finite(p: f64) -> Result<NormOrder> {
        if p > 1.0 && p.is_finite() {
            Ok(NormOrder::Finite(p))
        } else {
            Err(Error::InvalidInput(alloc::format!("norm order must satisfy 1 < p < ∞ (got {p})")))
        }
    }

    /// `1/p`, which is 0 for the sup norm.
    pub fn reciprocal(self) -> f64 {
        match self {
            NormOrder::Finite(p) => 1.0 / p,
            NormOrder::Infinity => 0.0,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, NormOrder::Infinity)
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormOrder::Finite(p) => write!(f, "{p:?}"),
            NormOrder::Infinity => f.write_str("inf"),
        }
    }
}

impl core::str::FromStr for NormOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<NormOrder> {
        let s = s.trim();
        if matches!(s, "inf" | "infinity" | "∞") {
            return Ok(NormOrder::Infinity);
        }
        let p: f64 = s
            .parse()
            .map_err(|_| Error::InvalidInput(alloc::format!("not a norm order: '{s}'")))?;
        NormOrder::finite(p)
    }
}

/// `(∫_0^1 |g|^p dx)^{1/p}` by the trapezoid rule over uniform samples.
/// Scaled by the sample maximum so large `p` cannot overflow.
pub fn lp_norm(samples: &[f64], p: f64) -> f64 {
    let m = sup_norm(samples);
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    let scaled: Vec<f64> = samples.iter().map(|g| libm::pow(g.abs() / m, p)).collect();
    m * libm::pow(trapezoid_unit(&scaled), 1.0 / p)
}

pub fn sup_norm(samples: &[f64]) -> f64 {
    samples.iter().fold(0.0f64, |m, g| m.max(g.abs()))
}

pub fn norm(samples: &[f64], order: NormOrder) -> f64 {
    match order {
        NormOrder::Finite(p) => lp_norm(samples, p),
        NormOrder::Infinity => sup_norm(samples),
    }
}

fn log_ratios(rho_row: &[f64], rho_s: f64) -> Result<Vec<f64>> {
    rho_row
        .iter()
        .map(|&r| {
            if r > 0.0 {
                Ok(libm::log(r / rho_s))
            } else {
                Err(Error::InvalidInput(alloc::format!("density sample {r} is not positive")))
            }
        })
        .collect()
}

/// `(∫_0^1 |ln(ρ/ρs)|^p dx)^{1/p}`.
pub fn lp_log_norm(rho_row: &[f64], rho_s: f64, p: f64) -> Result<f64> {
    Ok(lp_norm(&log_ratios(rho_row, rho_s)?, p))
}

/// `max_x |ln(ρ/ρs)|` over the samples.
pub fn sup_log_norm(rho_row: &[f64], rho_s: f64) -> Result<f64> {
    Ok(sup_norm(&log_ratios(rho_row, rho_s)?))
}

pub fn log_norm(rho_row: &[f64], rho_s: f64, order: NormOrder) -> Result<f64> {
    Ok(norm(&log_ratios(rho_row, rho_s)?, order))
}

/// `h(s) = 1` for `s < 0` and `0` otherwise.
#[inline]
pub fn heaviside_h(s: f64) -> f64 {
    if s < 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Running extremals at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremals {
    /// `min v` over `[0, t] × [0, 1]`.
    pub vmin: f64,
    /// `max ∂v/∂x` over `[0, t] × [0, 1]`.
    pub vmax: f64,
    /// `max a` over `[0, t] × [0, 1]`; 0 when there is no coefficient.
    pub a_max: f64,
}

/// Running extremals on every grid row.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtremalTrace {
    vmin: Vec<f64>,
    vmax: Vec<f64>,
    a_max: Vec<f64>,
}

impl ExtremalTrace {
    pub fn new(v: &VelocityField, a: Option<&SpaceTimeField>, grid: &Grid) -> ExtremalTrace {
        let vmin = v.running_min();
        let mut vmax = Vec::with_capacity(grid.rows());
        let mut a_max = Vec::with_capacity(grid.rows());
        let (mut dm, mut am) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        let uniform_v = v.field().is_spatially_uniform();
        for k in 0..grid.rows() {
            let t = grid.t(k);
            if uniform_v {
                dm = dm.max(0.0);
            } else {
                for x in grid.xs() {
                    dm = dm.max(v.dvdx(t, x));
                }
            }
            match a {
                None => am = 0.0,
                Some(a) => match a.as_constant() {
                    Some(c) => am = am.max(c),
                    None => {
                        for x in grid.xs() {
                            am = am.max(a.eval(t, x));
                        }
                    }
                },
            }
            vmax.push(dm);
            a_max.push(am);
        }
        ExtremalTrace { vmin, vmax, a_max }
    }

    /// Extremals of a spatially uniform velocity given by its samples.
    pub fn from_uniform_velocity(v_samples: &[f64]) -> ExtremalTrace {
        let mut m = f64::INFINITY;
        let vmin = v_samples
            .iter()
            .map(|&v| {
                m = m.min(v);
                m
            })
            .collect();
        ExtremalTrace {
            vmin,
            vmax: alloc::vec![0.0; v_samples.len()],
            a_max: alloc::vec![0.0; v_samples.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.vmin.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vmin.is_empty()
    }

    pub fn at(&self, k: usize) -> Extremals {
        Extremals {
            vmin: self.vmin[k],
            vmax: self.vmax[k],
            a_max: self.a_max[k],
        }
    }

    /// The same trace with `A ≡ 0`.
    pub fn without_coefficient(mut self) -> ExtremalTrace {
        self.a_max.iter_mut().for_each(|a| *a = 0.0);
        self
    }
}

/// Extremals over `[0, t]` for a grid time `t`.
pub fn extremals(v: &VelocityField, a: Option<&SpaceTimeField>, grid: &Grid, t: f64) -> Extremals {
    ExtremalTrace::new(v, a, grid).at(grid.row_of(t))
}

/// `max g(s_i)·exp(−μ(t − s_i))` over grid samples `s_i = i·dt` in
/// `[window_start, t_k]`.
pub fn fading_memory_max(samples: &[f64], dt: f64, k: usize, mu: f64, window_start: f64) -> f64 {
    let t = k as f64 * dt;
    let first = libm::ceil(window_start / dt - 1e-9).max(0.0) as usize;
    (first.min(k)..=k)
        .map(|i| samples[i] * libm::exp(-mu * (t - i as f64 * dt)))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// One norm of a quantity on every grid time, optionally paired with a
/// bound.
#[derive(Debug, Clone, PartialEq)]
pub struct NormTrace {
    pub order: NormOrder,
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Option<Vec<f64>>,
}

impl NormTrace {
    /// `rhs − lhs` per time; empty without a bound.
    pub fn margins(&self) -> Vec<f64> {
        match &self.rhs {
            Some(r) => r.iter().zip(&self.lhs).map(|(r, l)| r - l).collect(),
            None => Vec::new(),
        }
    }
}
