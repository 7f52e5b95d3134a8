use std::path::PathBuf;

/// Errors produced anywhere in the re-ranking pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("LP solver failed after {iterations} iterations: {detail}")]
    SolverFailure { iterations: usize, detail: String },

    /// The solver returned a point that violates its own constraints beyond
    /// tolerance. This is a solver bug, not a user error.
    #[error("corrupt solver output: {0}")]
    CorruptSolution(String),

    #[error("inconsistent input: {0}")]
    InconsistentInput(String),

    #[error("decomposition failed at component {component} with residual mass {residual:.3e}: no perfect matching on the residual support")]
    DecompositionFailure { component: usize, residual: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("dataset at {0} is empty after filtering")]
    EmptyDataset(PathBuf),

    #[error("unknown item ids: {0:?}")]
    UnknownItems(Vec<u64>),

    /// Wraps an error from one stage of the pipeline.
    #[error("{phase}: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("user {user} at lambda {lambda}: {source}")]
    User {
        user: u64,
        lambda: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn in_phase(self, phase: &'static str) -> Self {
        Error::Phase {
            phase,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
