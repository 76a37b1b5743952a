use std::fmt;
use std::path::PathBuf;

use serde::Serialize;

/// One problem found in a scenario file. `line` is 1-based; `None` marks
/// a problem with the scenario as a whole, such as a missing key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The scenario file is malformed or fails validation. Every problem
    /// found is listed.
    #[error("invalid scenario {}: {}", path.display(), join(diagnostics))]
    Scenario { path: PathBuf, diagnostics: Vec<Diagnostic> },
    #[error("{0}")]
    Core(#[from] continuity_core::Error),
    #[error("{action} {}: {source}", path.display())]
    Io {
        action: &'static str,
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    /// The mode cannot run on this kind of scenario.
    #[error("{0}")]
    Unsupported(String),
}

fn join(diagnostics: &[Diagnostic]) -> String {
    diagnostics.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl Error {
    /// Stable identifier used in the error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Scenario { .. } => "scenario",
            Error::Core(_) => "numerics",
            Error::Io { .. } => "io",
            Error::Csv(_) | Error::Json(_) => "output",
            Error::Unsupported(_) => "unsupported",
        }
    }

    /// Machine-readable form written to stderr by the binary.
    pub fn to_json(&self) -> serde_json::Value {
        let diagnostics = match self {
            Error::Scenario { diagnostics, .. } => diagnostics.clone(),
            _ => Vec::new(),
        };
        serde_json::json!({
            "error": {
                "kind": self.kind(),
                "message": self.to_string(),
                "diagnostics": diagnostics,
            }
        })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
