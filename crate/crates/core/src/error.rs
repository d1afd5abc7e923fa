use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("port index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("port indices must differ, got {0} twice")]
    EqualIndices(usize),

    #[error("degenerate gauge: border entry ({row}, {col}) has magnitude {magnitude:e}")]
    DegenerateGauge {
        row: usize,
        col: usize,
        magnitude: f64,
    },

    #[error("input port {0} has no recorded single-photon counts")]
    EmptyInput(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("{failed} of {total} uncertainty samples did not converge")]
    TooManyFailures { failed: usize, total: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error is a shape/dimension problem rather than bad values.
    pub fn is_shape(&self) -> bool {
        matches!(self, Error::DimensionMismatch { .. })
    }
}
