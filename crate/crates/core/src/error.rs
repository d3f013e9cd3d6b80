use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("decomposition construction failed: {0}")]
    Construction(String),

    #[error("layout mismatch: expected length {expected}, got {actual}")]
    LayoutMismatch { expected: usize, actual: usize },

    #[error(
        "local Newton solve on subdomain {subdomain} failed after {iterations} iterations \
         (residual history {history:?})"
    )]
    LocalDivergence {
        subdomain: usize,
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("coarse-level solve did not converge: {0}")]
    CoarseDivergence(String),

    #[error("singular Jacobian block on subdomain {0}")]
    SingularBlock(usize),

    #[error("state mismatch: {0}")]
    StateMismatch(&'static str),

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("determinism violation: {0}")]
    Determinism(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Failures of a trial state that an outer line search may recover from by
    /// shortening the step.
    pub fn is_recoverable(&self) -> bool {
        matches!(
            self,
            Error::LocalDivergence { .. }
                | Error::CoarseDivergence(_)
                | Error::NumericalBreakdown(_)
                | Error::SingularBlock(_)
        )
    }
}
