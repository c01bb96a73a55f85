use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown treatment label '{label}' (valid labels are the first {t} letters)")]
    UnknownTreatmentLabel { label: char, t: usize },

    #[error("{what}: expected length {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFiniteInput(String),

    #[error("mean {mu} outside the support of the {family} family")]
    DomainError { family: String, mu: f64 },

    #[error(
        "correlation matrix for sequence {sequence} is not positive definite (smallest eigenvalue {min_eigenvalue:e})"
    )]
    NotPositiveDefinite { sequence: String, min_eigenvalue: f64 },

    #[error("no correlation given for treatment pair {pair}")]
    MissingPairCorrelation { pair: String },

    #[error("invalid correlation: {0}")]
    InvalidCorrelation(String),

    #[error("working covariance for sequence {sequence} is singular")]
    SingularWorkingCovariance { sequence: String },

    #[error("information matrix is singular (condition number {condition:e})")]
    SingularInformation { condition: f64 },

    #[error("matrix is singular to working precision")]
    SingularMatrix,

    #[error("optimizer did not converge after {iterations} iterations: {detail}")]
    DidNotConverge { iterations: usize, detail: String },

    #[error("GEE fit did not converge after {iterations} iterations")]
    FitDidNotConverge { iterations: usize },

    #[error("stacked design matrix has rank {rank}, need {columns}")]
    RankDeficientDesign { rank: usize, columns: usize },

    #[error("sequence {0} appears more than once")]
    DuplicateSequence(String),

    #[error("incompatible problems: {0}")]
    IncompatibleProblems(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
