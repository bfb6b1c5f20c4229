use alloc::string::String;

/// Everything that can go wrong inside the kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("numerical certificate failed: {0}")]
    Certificate(String),
    #[error("grid refinement did not converge: {0}")]
    NotConverged(String),
    #[error("diagonal configuration: {0}")]
    Diagonal(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
