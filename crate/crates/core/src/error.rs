use thiserror::Error;

use crate::parser::ParseError;
use crate::violation::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("{what} is not well formed: {}", list(.violations))]
    IllFormed {
        what: &'static str,
        violations: Vec<Violation>,
    },

    /// A state space or enumeration grew past its configured cap.
    #[error("{what} exceeded the cap of {cap}")]
    ResourceLimit { what: &'static str, cap: usize },

    #[error("ill-formed judgment: {0}")]
    IllFormedJudgment(String),
}

fn list(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
