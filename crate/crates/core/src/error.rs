use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("invalid spectrum: {0}")]
    Spectrum(String),
    #[error("invalid beamformer: {0}")]
    Beamformer(String),
    #[error("grid mismatch: expected {expected} samples, got {actual}")]
    GridMismatch { expected: usize, actual: usize },
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("phase fit did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("field cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
