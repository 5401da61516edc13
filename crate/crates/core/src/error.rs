use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::model::Violation;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid tag {0:?}: expected [A-Za-z][A-Za-z0-9_-]*")]
pub struct TagError(pub String);

#[derive(Debug, Error)]
pub enum CascadeError {
    #[error("cannot read {}: {source}", path.display())]
    Input {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed scenario: {0}")]
    ScenarioParse(String),
    #[error("scenario validation failed:\n{}", render_violations(.0))]
    Validation(Vec<Violation>),
    #[error("malformed trace at line {line}: {message}")]
    TraceParse { line: usize, message: String },
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("trace sink failure: {0}")]
    Sink(#[source] io::Error),
}

fn render_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl CascadeError {
    /// Process exit code: 2 for bad input, 3 for internal faults.
    pub fn exit_code(&self) -> i32 {
        match self {
            CascadeError::Input { .. }
            | CascadeError::ScenarioParse(_)
            | CascadeError::Validation(_)
            | CascadeError::TraceParse { .. } => 2,
            CascadeError::Invariant(_) | CascadeError::Sink(_) => 3,
        }
    }
}

pub type Result<T, E = CascadeError> = std::result::Result<T, E>;
