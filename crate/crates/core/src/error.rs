use thiserror::Error;

use crate::schedule::ScheduleReport;
use crate::steiner::VerificationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("division by zero in finite field")]
    DivisionByZero,

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("design is not a Steiner system: {0}")]
    InvalidDesign(Box<VerificationReport>),

    #[error("design unsuitable for tetrahedral partitioning ({stage}): {detail}")]
    DesignUnsuitable { stage: &'static str, detail: String },

    #[error("matching infeasible: needed {needed} matched edges, found {found}")]
    Infeasible { needed: usize, found: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate iterate: zero vector at iteration {iteration}")]
    DegenerateIterate { iteration: usize },

    #[error("invalid communication schedule: {}", .0.summary())]
    InvalidSchedule(Box<ScheduleReport>),

    #[error("locality violation: processor {processor} needs row block {row_block} it does not own")]
    Locality { processor: usize, row_block: u32 },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
