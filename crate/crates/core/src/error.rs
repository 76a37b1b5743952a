use alloc::string::String;
use core::fmt;

use crate::expr::{EvalError, ParseError};

/// Errors raised by the solvers and validators.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An expression failed to parse.
    Parse(ParseError),
    /// An expression could not be evaluated.
    Eval(EvalError),
    /// A field or grid failed validation.
    InvalidInput(String),
    /// The velocity is not strictly positive on the evaluation grid.
    NonPositiveVelocity { t: f64, x: f64, value: f64 },
    /// A field produced NaN or an infinity on the evaluation grid.
    NonFinite { what: &'static str, t: f64, x: f64 },
    /// An operation was called outside of its domain of validity.
    Precondition(String),
    /// `dt·max v / Δx` exceeds the allowed Courant number.
    Cfl { courant: f64, limit: f64 },
    /// The fixed-point iteration did not converge.
    NoConvergence { iterations: usize, residual: f64, contraction: f64 },
    /// The time step is longer than the contraction window.
    WindowTooLong { window: f64, dt: f64 },
    /// The production speed law is not positive on the relevant range.
    NonPositiveSpeed { load: f64, value: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parse(e) => write!(f, "parse error: {e}"),
            Error::Eval(e) => write!(f, "evaluation error: {e}"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::NonPositiveVelocity { t, x, value } => {
                write!(f, "velocity not positive on grid: v({t}, {x}) = {value}")
            }
            Error::NonFinite { what, t, x } => {
                write!(f, "{what} is not finite at (t, x) = ({t}, {x})")
            }
            Error::Precondition(msg) => write!(f, "precondition violated: {msg}"),
            Error::Cfl { courant, limit } => {
                write!(f, "CFL violation: courant number {courant} exceeds {limit}")
            }
            Error::NoConvergence {
                iterations,
                residual,
                contraction,
            } => write!(
                f,
                "fixed point did not converge after {iterations} iterations \
                 (residual {residual:e}, observed contraction {contraction})"
            ),
            Error::WindowTooLong { window, dt } => write!(
                f,
                "time step {dt} exceeds the contraction window {window}; refine dt"
            ),
            Error::NonPositiveSpeed { load, value } => {
                write!(f, "speed law not positive: lambda({load}) = {value}")
            }
        }
    }
}

impl core::error::Error for Error {}

impl From<ParseError> for Error {
    fn from(e: ParseError) -> Self {
        Error::Parse(e)
    }
}

impl From<EvalError> for Error {
    fn from(e: EvalError) -> Self {
        Error::Eval(e)
    }
}
