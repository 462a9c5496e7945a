use alloc::string::String;

/// Errors raised by the clustering, decoding and scoring stages.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A caller violated an operation's precondition (shape, range, invariant).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Input data failed validation.
    #[error("invalid data: {0}")]
    Data(String),

    /// A configuration value is out of its allowed domain.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An eigensolver or SVD did not produce a usable result.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The eigengap sweep found no usable gap for any binarization factor.
    #[error("indeterminate speaker count: {0}")]
    IndeterminateCount(String),

    /// No label sequence satisfies the duration constraints.
    #[error("no feasible label sequence: {0}")]
    Infeasible(String),

    /// The reference timeline carries no scorable speech.
    #[error("error rate undefined: {0}")]
    UndefinedRate(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! contract {
    ($($arg:tt)*) => {
        $crate::error::Error::Contract(alloc::format!($($arg)*))
    };
}
pub(crate) use contract;
