//! Scenario files, seeded campaigns, run modes and report formats for
//! `continuity-core`.

pub mod campaign;
pub mod error;
pub mod report;
pub mod run;
pub mod scenario;

pub use error::{Diagnostic, Error, Result};
pub use run::{run, Mode, RunOptions, RunReport};
pub use scenario::{load_scenario, parse_scenario, Problem, ProblemKind, Scenario};
