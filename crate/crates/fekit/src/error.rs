use std::path::PathBuf;

/// Errors reported by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension {0} is out of the supported range 1..={1}")]
    DimensionOutOfRange(usize, usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported element: {0}")]
    Unsupported(String),
    #[error("singular matrix: pivot {pivot:e} below threshold {threshold:e}")]
    SingularMatrix { pivot: f64, threshold: f64 },
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("nonconforming mesh: {0}")]
    Nonconforming(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("entry ({row}, {col}) is outside the compressed sparsity pattern")]
    OutsidePattern { row: usize, col: usize },
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
