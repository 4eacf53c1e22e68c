use thiserror::Error;

/// Errors produced anywhere in the distance pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty sample")]
    EmptySample,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("quadrature failure: zolotarev distance evaluated to {value:e}")]
    QuadratureFailure { value: f64 },

    #[error("singular covariance for class {class}; retry with a ridge term")]
    SingularCovariance { class: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("metric {0} is not supported here")]
    UnsupportedMetric(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
