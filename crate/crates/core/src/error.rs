use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not square: {rows} rows, row {row} has {cols} entries")]
    NotSquare { rows: usize, row: usize, cols: usize },
    #[error("matrix is not symmetric at ({row}, {col}): |a_ij - a_ji| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },
    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("sample already carries costs")]
    AlreadyHasCosts,
    #[error("sample has no costs")]
    MissingCosts,
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("no Monte Carlo draw fell in the lower level set")]
    NoMass,
    #[error("statistic at index {index} is not positive ({value})")]
    NonPositiveStatistic { index: usize, value: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, found })
        }
    }
}
