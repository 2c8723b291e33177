use thiserror::Error;

/// Errors raised by the library.
///
/// Variants fall in two groups: validation problems with the caller's input
/// (exit code 1 in the CLI) and numerical failures (exit code 2).
#[derive(Debug, Error)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unstable parameters refused: {0}")]
    Unstable(String),

    #[error("numeric overflow: {what} (search bound {bound})")]
    NumericOverflow { what: String, bound: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("latent process left its domain at t={t}, coordinate {coord}: value {value}")]
    LatentDomain { t: usize, coord: usize, value: f64 },

    #[error("covariance unavailable: J is singular or ill-conditioned (spectrum {spectrum:?})")]
    CovarianceUnavailable { spectrum: Vec<f64> },

    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    #[error("bootstrap failed: {dropped} of {total} replications dropped")]
    BootstrapFailed { dropped: usize, total: usize },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by invalid user input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Precondition(_)
                | Error::Input(_)
                | Error::Parse { .. }
                | Error::Unsupported(_)
                | Error::Unstable(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
