use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared by every module.
///
/// `InvalidInput` is a caller mistake (bad grid, bad parameter); everything
/// else means the numerics could not deliver a trustworthy answer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("under-resolved: {0}")]
    UnderResolved(String),
    #[error("fit failed: {0}")]
    FitFailure(String),
    #[error("singular: {0}")]
    Singular(String),
    #[error("no convergence: {0}")]
    NonConvergence(String),
}

impl Error {
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::InvalidInput(_))
    }
}

macro_rules! invalid {
    ($($arg:tt)*) => { $crate::error::Error::InvalidInput(format!($($arg)*)) };
}
pub(crate) use invalid;
