use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate box: w = {w}, h = {h}")]
    DegenerateBox { w: f64, h: f64 },

    #[error("input points are collinear")]
    CollinearInput,

    #[error("covariance is singular or not positive definite (det = {det:e})")]
    SingularCovariance { det: f64 },

    #[error("covariance is not symmetric")]
    AsymmetricCovariance,

    #[error("image size must be positive, got {width}x{height}")]
    EmptyImage { width: u32, height: u32 },

    #[error("offset set is empty")]
    EmptyOffsets,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("could not place instance {index} after {attempts} attempts")]
    PlacementFailure { index: usize, attempts: usize },

    #[error("instance {index} (angle {angle_deg:.3} deg, size {size:.3} px) falls in no bin")]
    BinMismatch {
        index: usize,
        angle_deg: f64,
        size: f64,
    },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("unknown category `{0}`")]
    UnknownCategory(String),

    #[error("prediction count {got} does not match prior count {expected}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("failed to write report: {0}")]
    Sink(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
