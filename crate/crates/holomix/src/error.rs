use thiserror::Error;

/// Error type shared by every layer of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),
    #[error("singular operator: {0}")]
    Singular(String),
    #[error("conditioning failure: {0}")]
    Conditioning(String),
    #[error("covariance not positive semi-definite at q index {q:?}: min eigenvalue {min_eig}")]
    NotPositive { q: Vec<i64>, min_eig: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported kind: {0}")]
    UnsupportedKind(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown experiment: {0}")]
    UnknownExperiment(String),
    #[error("fit did not converge: {0}")]
    FitFailure(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
