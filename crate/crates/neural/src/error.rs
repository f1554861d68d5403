use thiserror::Error;

pub type Result<T, E = NeuralError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch in {op}: expected {expected:?}, got {got:?}")]
    Shape { op: &'static str, expected: Vec<usize>, got: Vec<usize> },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Signal(#[from] hrrp_core::Error),
}

pub(crate) fn shape_err(op: &'static str, expected: &[usize], got: &[usize]) -> NeuralError {
    NeuralError::Shape { op, expected: expected.to_vec(), got: got.to_vec() }
}
