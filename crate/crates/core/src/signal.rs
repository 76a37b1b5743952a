//! Evaluable scalar functions of `t`, `x` or `(t, x)`.
//!
//! Each wrapper is either a constant or a shared closure, so cloning is
//! cheap and evaluation is safe from any thread. Expression-backed
//! functions return NaN where the expression has no value; validators
//! catch that on the evaluation grid.

use alloc::sync::Arc;
use core::fmt;

use crate::expr::Expression;
use crate::{Error, Result};

/// Default step for finite-difference derivatives of parsed fields.
pub const FD_STEP: f64 = 1e-6;

type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

fn slot_map(expr: &Expression, names: &[&str]) -> Result<[usize; 2]> {
    let mut map = [usize::MAX; 2];
    for (slot, var) in expr.variables().iter().enumerate() {
        if slot >= 2 {
            return Err(Error::InvalidInput(alloc::format!(
                "expression declares too many variables: {:?}",
                expr.variables()
            )));
        }
        match names.iter().position(|n| n == var) {
            Some(i) => map[slot] = i,
            None => {
                return Err(Error::InvalidInput(alloc::format!(
                    "variable '{var}' is not allowed here (allowed: {names:?})"
                )))
            }
        }
    }
    Ok(map)
}

macro_rules! one_variable {
    ($(#[$doc:meta])* $name:ident, $var:literal) => {
        $(#[$doc])*
        #[derive(Clone)]
        pub struct $name {
            constant: Option<f64>,
            func: Fn1,
        }

        impl $name {
            pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
                Self { constant: None, func: Arc::new(f) }
            }

            pub fn constant(c: f64) -> Self {
                Self { constant: Some(c), func: Arc::new(move |_| c) }
            }

            pub fn zero() -> Self {
                Self::constant(0.0)
            }

            /// Parses an expression in the single variable of this slot.
            pub fn parse(src: &str) -> Result<Self> {
                Self::from_expression(Expression::parse(src, &[$var])?)
            }

            pub fn from_expression(expr: Expression) -> Result<Self> {
                let map = slot_map(&expr, &[$var])?;
                if expr.free_variables().is_empty() {
                    if let Ok(c) = expr.eval_slots(&[]) {
                        return Ok(Self::constant(c));
                    }
                }
                let arity = expr.variables().len();
                debug_assert!(arity <= 1 && (arity == 0 || map[0] == 0));
                Ok(Self::new(move |s| expr.eval_slots(&[s]).unwrap_or(f64::NAN)))
            }

            #[inline]
            pub fn eval(&self, s: f64) -> f64 {
                match self.constant {
                    Some(c) => c,
                    None => (self.func)(s),
                }
            }

            pub fn as_constant(&self) -> Option<f64> {
                self.constant
            }

            /// Central difference with step `h`.
            pub fn derivative(&self, s: f64, h: f64) -> f64 {
                if self.constant.is_some() {
                    return 0.0;
                }
                (self.eval(s + h) - self.eval(s - h)) / (2.0 * h)
            }

            /// Second-order one-sided forward difference with step `h`,
            /// for data that only exists to the right of `s`.
            pub fn forward_derivative(&self, s: f64, h: f64) -> f64 {
                if self.constant.is_some() {
                    return 0.0;
                }
                (-3.0 * self.eval(s) + 4.0 * self.eval(s + h) - self.eval(s + 2.0 * h)) / (2.0 * h)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                match self.constant {
                    Some(c) => write!(f, concat!(stringify!($name), "({})"), c),
                    None => f.write_str(concat!(stringify!($name), "(<fn>)")),
                }
            }
        }
    };
}

one_variable!(
    /// A scalar function of time, such as a boundary disturbance `b(t)`.
    ScalarSignal,
    "t"
);
one_variable!(
    /// A scalar function of position on `[0, 1]`, such as `ρ0(x)`.
    ScalarProfile,
    "x"
);

impl ScalarSignal {
    /// A signal in the load variable `W`, used for production speed laws.
    pub fn parse_in(src: &str, var: &str) -> Result<Self> {
        let expr = Expression::parse(src, &[var])?;
        if expr.free_variables().is_empty() {
            if let Ok(c) = expr.eval_slots(&[]) {
                return Ok(Self::constant(c));
            }
        }
        Ok(Self::new(move |s| expr.eval_slots(&[s]).unwrap_or(f64::NAN)))
    }
}

/// A scalar function of `(t, x)`.
#[derive(Clone)]
pub struct SpaceTimeField {
    constant: Option<f64>,
    spatially_uniform: bool,
    func: Fn2,
}

impl SpaceTimeField {
    pub fn new(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            constant: None,
            spatially_uniform: false,
            func: Arc::new(f),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            constant: Some(c),
            spatially_uniform: true,
            func: Arc::new(move |_, _| c),
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// A field that depends on time only.
    pub fn from_signal(signal: ScalarSignal) -> Self {
        if let Some(c) = signal.as_constant() {
            return Self::constant(c);
        }
        Self {
            constant: None,
            spatially_uniform: true,
            func: Arc::new(move |t, _| signal.eval(t)),
        }
    }

    /// A field that depends on position only.
    pub fn from_profile(profile: ScalarProfile) -> Self {
        if let Some(c) = profile.as_constant() {
            return Self::constant(c);
        }
        Self::new(move |_, x| profile.eval(x))
    }

    /// Parses an expression in `t` and `x`.
    pub fn parse(src: &str) -> Result<Self> {
        Self::from_expression(Expression::parse(src, &["t", "x"])?)
    }

    pub fn from_expression(expr: Expression) -> Result<Self> {
        let map = slot_map(&expr, &["t", "x"])?;
        let free = expr.free_variables();
        if free.is_empty() {
            if let Ok(c) = expr.eval_slots(&[]) {
                return Ok(Self::constant(c));
            }
        }
        let uniform = !free.contains(&"x");
        let arity = expr.variables().len();
        let func: Fn2 = match (arity, map) {
            (0, _) => Arc::new(move |_, _| expr.eval_slots(&[]).unwrap_or(f64::NAN)),
            (1, [0, _]) => Arc::new(move |t, _| expr.eval_slots(&[t]).unwrap_or(f64::NAN)),
            (1, _) => Arc::new(move |_, x| expr.eval_slots(&[x]).unwrap_or(f64::NAN)),
            (_, [0, _]) => Arc::new(move |t, x| expr.eval_slots(&[t, x]).unwrap_or(f64::NAN)),
            _ => Arc::new(move |t, x| expr.eval_slots(&[x, t]).unwrap_or(f64::NAN)),
        };
        Ok(Self {
            constant: None,
            spatially_uniform: uniform,
            func,
        })
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self.constant {
            Some(c) => c,
            None => (self.func)(t, x),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }

    pub fn is_zero(&self) -> bool {
        self.constant == Some(0.0)
    }

    /// True when the field is known not to depend on `x`.
    pub fn is_spatially_uniform(&self) -> bool {
        self.spatially_uniform
    }

    /// Central difference in `x` with step `h`.
    #[inline]
    pub fn dx(&self, t: f64, x: f64, h: f64) -> f64 {
        if self.spatially_uniform {
            return 0.0;
        }
        (self.eval(t, x + h) - self.eval(t, x - h)) / (2.0 * h)
    }

    /// Second-order one-sided difference in `x`, looking right.
    pub fn dx_forward(&self, t: f64, x: f64, h: f64) -> f64 {
        if self.spatially_uniform {
            return 0.0;
        }
        (-3.0 * self.eval(t, x) + 4.0 * self.eval(t, x + h) - self.eval(t, x + 2.0 * h)) / (2.0 * h)
    }
}

impl fmt::Debug for SpaceTimeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.constant {
            Some(c) => write!(f, "SpaceTimeField({c})"),
            None => f.write_str("SpaceTimeField(<fn>)"),
        }
    }
}
