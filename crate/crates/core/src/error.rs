use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// FFT length is not a power of two (or is zero).
    #[error("size error: length {0} is not a power of two")]
    Size(usize),
    /// A parameter lies outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Malformed or inconsistent arguments.
    #[error("argument error: {0}")]
    Argument(String),
    /// Echoes do not cover every sub-band exactly once.
    #[error("stitch error: {0}")]
    Stitch(String),
    #[error("normalization error: {0}")]
    Normalization(String),
    #[error("calibration error: {0}")]
    Calibration(String),
    #[error("estimation error: {0}")]
    Estimation(String),
}
