use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A value violates a type invariant.
    #[error("invariant violated for {what}: {detail}")]
    Invariant { what: &'static str, detail: String },

    #[error("alpha too small for n: alpha={alpha}, n={n} (need alpha*n >= 1)")]
    AlphaTooSmall { alpha: f64, n: usize },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("LP solver failure: {0}")]
    Solver(String),

    #[error("no convergence after {iterations} iterations (gap {gap:e} > tol {tol:e})")]
    NoConvergence { iterations: usize, gap: f64, tol: f64 },

    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("learner failure: {0}")]
    Learner(String),

    #[error("data error at row {row}, column {column:?}: {detail}")]
    Parse {
        row: usize,
        column: String,
        detail: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("artifact format error at line {line}: {detail}")]
    Format { line: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invariant(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Invariant {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn at_round(self, round: usize) -> Self {
        Error::Round {
            round,
            source: Box::new(self),
        }
    }

    /// True for errors that originate in a numerical solver, possibly wrapped
    /// in a round context.
    pub fn is_solver(&self) -> bool {
        match self {
            Error::Solver(_) | Error::NoConvergence { .. } => true,
            Error::Round { source, .. } => source.is_solver(),
            _ => false,
        }
    }

    /// True for errors caused by the input data or its shape.
    pub fn is_data(&self) -> bool {
        match self {
            Error::Parse { .. } | Error::Data(_) | Error::Format { .. } | Error::Io(_) => true,
            Error::DimensionMismatch { .. } | Error::AlphaTooSmall { .. } => true,
            Error::Round { source, .. } => source.is_data(),
            _ => false,
        }
    }
}
