use thiserror::Error;

/// Errors raised by the model, the numerical kernels and the command layer.
#[derive(Debug, Error)]
pub enum Error {
    /// A value outside the domain of an operation.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A parameter violates the long-run-variance or truncation constraint.
    #[error("constraint violated: {message} (admissible upper bound {upper_bound})")]
    Constraint { message: String, upper_bound: f64 },

    /// A matrix that should be positive definite was not.
    #[error("factorization failed at pivot {pivot}: value {value}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    /// Other numerical breakdown (NaN, overflow).
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// The sampler rejected every proposal as inadmissible for too long.
    #[error("sampler diverged after {iterations} consecutive inadmissible proposals; last state: {last_state}")]
    Divergence { iterations: usize, last_state: String },

    /// Malformed input data, with the offending line when known.
    #[error("{path}: line {line}: {message}")]
    Data {
        path: String,
        line: u64,
        message: String,
    },

    /// Invalid configuration document.
    #[error("config: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Short machine-readable tag, used in the CLI's JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::Constraint { .. } => "constraint",
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::Numeric(_) => "numeric",
            Error::Divergence { .. } => "divergence",
            Error::Data { .. } => "data",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }

    /// Process exit code: 2 for bad input or schema, 1 for runtime and numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_)
            | Error::Constraint { .. }
            | Error::Data { .. }
            | Error::Config(_)
            | Error::Io { .. } => 2,
            Error::NotPositiveDefinite { .. } | Error::Numeric(_) | Error::Divergence { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
