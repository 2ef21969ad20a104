use std::path::PathBuf;

/// Errors raised across the estimation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid stress profile: {0}")]
    InvalidProfile(String),

    #[error("insufficient data: need failures in both steps (n1 = {n1}, n2 = {n2})")]
    InsufficientData { n1: usize, n2: usize },

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("numerical evaluation failed: {0}")]
    Evaluation(String),

    #[error("degenerate information matrix: {0}")]
    DegenerateInformation(String),

    #[error("infeasible contamination scheme: {0}")]
    InfeasibleScheme(String),

    #[error("logit transform undefined at boundary value {0}")]
    Boundary(f64),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("inconsistent input: {0}")]
    Consistency(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
