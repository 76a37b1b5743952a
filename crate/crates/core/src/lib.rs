//! Numerical laboratory for the one-dimensional continuity equation
//!
//! ```text
//! ρ_t + (ρ v)_x = 0,   x ∈ [0, 1],   ρ(t, 0) = ρs·exp(b(t))
//! ```
//!
//! and for the general linear transport problem `w_t + v w_x = a w + f`.
//! Solutions are built from the exact characteristic formulas, compared
//! against an independent upwind scheme, and checked against the
//! input-to-state style stability estimates in logarithmic L^p and sup
//! norms. The non-local manufacturing model `ρ_t + λ(W) ρ_x = 0` with
//! `W = ∫ρ dx` is solved under boundary feedback by a windowed
//! contraction-mapping iteration.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, scenario
//! parsing and the command line runner live in `continuity-lab`.
#![no_std]
#![deny(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bounds;
pub mod characteristics;
pub mod continuity;
mod error;
pub mod expr;
pub mod fields;
pub mod grid;
pub mod manufacturing;
pub mod norms;
pub mod oracle;
pub mod quadrature;
pub mod signal;
pub mod transport;

pub use error::Error;
pub use expr::Expression;
pub use grid::Grid;
pub use norms::NormOrder;
pub use signal::{ScalarProfile, ScalarSignal, SpaceTimeField};
pub use transport::SolutionField;

/// Result alias used across the crate.
pub type Result<T, E = Error> = core::result::Result<T, E>;
