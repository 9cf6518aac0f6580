use std::path::PathBuf;

/// Errors raised anywhere in the optimization and simulation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is singular at pivot index {pivot_index}")]
    SingularMatrix { pivot_index: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },
    #[error("matrix must have at least one row and one column")]
    EmptyMatrix,
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("channel matrix is rank deficient")]
    RankDeficient,
    #[error("combiner column {user} has zero norm")]
    DegenerateCombiner { user: usize },
    #[error("power control infeasible at eta = {eta}")]
    Infeasible { eta: f64 },
    #[error(
        "a {rows}x{cols} grid with spacing {spacing} m does not fit in a region of side {region} m"
    )]
    RegionTooSmall {
        rows: usize,
        cols: usize,
        spacing: f64,
        region: f64,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn dims(expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Format { .. } => 2,
            _ => 1,
        }
    }
}
