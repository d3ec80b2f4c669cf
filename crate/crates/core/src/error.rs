use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Parameters that can never produce a valid run (bad dimensions, boxes, budgets).
    #[error("configuration error: {0}")]
    Config(String),

    /// Well-formed but unusable input data.
    #[error("input error: {0}")]
    Input(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    /// No well-conditioned reduced space was found; the algorithm's "Failure" outcome.
    #[error(
        "Failure: reduced space not well conditioned after {attempts} attempt(s) \
         (best sigma_min {best_sigma_min:.6} < threshold {threshold:.6})"
    )]
    Failure {
        attempts: usize,
        best_sigma_min: f64,
        threshold: f64,
    },

    /// The Gram matrix could not be factored, so affine projections are undefined.
    #[error("conditioning violation: {0}")]
    Conditioning(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    /// Alternating projections neither converged nor stagnated within the cap.
    #[error("indeterminate feasibility after {iterations} iterations (gap {gap:e}, tol {tol:e})")]
    Indeterminate { iterations: usize, gap: f64, tol: f64 },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the command-line front end.
    ///
    /// `1` usage, configuration and parse problems; `2` the conditioning
    /// "Failure"; `3` solver and numeric errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Input(_) | Error::Parse { .. } | Error::Io(_) => 1,
            Error::Failure { .. } => 2,
            Error::Conditioning(_)
            | Error::Numeric(_)
            | Error::Indeterminate { .. }
            | Error::Integrity(_) => 3,
        }
    }

    /// Short machine-readable class name used in JSON reports.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Input(_) => "input",
            Error::Parse { .. } => "parse",
            Error::Failure { .. } => "failure",
            Error::Conditioning(_) => "conditioning",
            Error::Numeric(_) => "numeric",
            Error::Indeterminate { .. } => "indeterminate",
            Error::Integrity(_) => "integrity",
            Error::Io(_) => "io",
        }
    }
}
