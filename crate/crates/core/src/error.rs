use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("outside the supported domain: {0}")]
    Domain(String),
    #[error("degenerate subspace basis: {0}")]
    DegenerateBasis(String),
    #[error("solver failed ({status}): {reason}")]
    Solver { status: String, reason: String },
    #[error("codebook I/O: {0}")]
    Io(String),
}

impl From<conic::ConicError> for Error {
    fn from(e: conic::ConicError) -> Self {
        Error::Solver {
            status: "numerical-error".into(),
            reason: e.to_string(),
        }
    }
}
