use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("entry {index} is not strictly positive ({value})")]
    NonPositiveEntry { index: usize, value: f64 },

    #[error("entries sum to {sum}, which is not 1 within tolerance {tol}")]
    NotNormalized { sum: f64, tol: f64 },

    #[error("at least 2 states are required, got {n}")]
    TooFewStates { n: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("input must be nonnegative, got {0}")]
    NegativeInput(f64),

    #[error("step {dt} exceeds the positivity bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },

    #[error("numerical blow-up at t = {t}: |p_{index}| = {value}")]
    NumericalBlowup { t: f64, index: usize, value: f64 },

    #[error("phi'' vanishes at x = {0}; mobility is undefined")]
    DegeneratePhi(f64),

    #[error("edge set is empty")]
    EmptyEdgeSet,

    #[error("generalized eigenproblem has an empty nontrivial subspace")]
    SingularPencil,

    #[error("edge ({i}, {j}) has zero weight")]
    ZeroEdge { i: usize, j: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
