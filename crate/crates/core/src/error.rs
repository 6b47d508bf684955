use thiserror::Error;

use crate::lambda_space::Violation;
use crate::report::CheckReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A point or parameter lies outside the set on which an operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// A candidate loss function is not in the admissible class.
    #[error("loss function rejected: {}", summarize(.0))]
    InvalidLambda(Vec<Violation>),

    /// An operation's precondition was checked and failed; the report carries witnesses.
    #[error("precondition failed: {}", .0.name)]
    Precondition(CheckReport),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("instance too large: {estimate} candidates exceeds the limit of {limit}")]
    InstanceTooLarge { estimate: f64, limit: f64 },

    /// A verdict was refused because it would not be meaningful.
    #[error("refused: {0}")]
    Refused(String),

    /// A guarantee that should hold by construction was violated numerically.
    #[error("guarantee violated: {0}")]
    Guarantee(String),
}

fn summarize(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("{} at x={}", v.clause, v.x))
        .collect::<Vec<_>>()
        .join("; ")
}
