use thiserror::Error;

use crate::model::SourceSet;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("row {row} sums to {sum}, expected exactly 1")]
    RowSum { row: usize, sum: String },
    #[error("entry ({row}, {col}) = {value} lies outside [0, 1]")]
    Range { row: usize, col: usize, value: String },
    #[error("invalid alphabet: {0}")]
    Alphabet(String),
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),
    #[error("invalid source set: {0}")]
    Source(String),
    #[error("output space of {space} sequences exceeds the enumeration cap of {cap}")]
    CapacityExceeded { space: String, cap: u64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("exact solver needs a positive support of at most {cap} sequences, got {support}")]
    ExactCapExceeded { support: usize, cap: usize },
    #[error("exact solver exhausted its budget of {budget} nodes")]
    SolverBudgetExceeded { budget: u64 },
    #[error("extraction produced an empty set: {0}")]
    EmptyExtraction(String),
    #[error("partition made no progress after {cells} cells: {reason}")]
    NonProgress {
        cells: usize,
        reason: String,
        /// Cells extracted before the failure.
        partial: Vec<SourceSet>,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by the desk-scale caps rather than by bad input.
    pub fn is_capacity(&self) -> bool {
        matches!(
            self,
            Error::CapacityExceeded { .. }
                | Error::ExactCapExceeded { .. }
                | Error::SolverBudgetExceeded { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
