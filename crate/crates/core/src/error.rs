use crate::PointId;

/// Errors produced by the index, the summarizers and the dataset readers.
#[derive(Debug, thiserror::Error)]
pub enum CoverSummError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point {0} not found")]
    NotFound(PointId),

    #[error("point id {id} is not newer than the last arrival {last}")]
    DuplicateId { id: PointId, last: PointId },

    #[error("index is empty")]
    EmptyIndex,

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("dataset format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = CoverSummError> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(CoverSummError::DimensionMismatch { expected, got });
    }
    Ok(())
}
