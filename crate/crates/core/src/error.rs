use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Tensor shapes do not agree; the message names the offending dimension.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// An argument is outside the operation's domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A value became NaN/Inf, or a loss hit a singularity.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! shape_err {
    ($($arg:tt)*) => { $crate::error::Error::Shape(alloc::format!($($arg)*)) };
}

macro_rules! invalid {
    ($($arg:tt)*) => { $crate::error::Error::InvalidArgument(alloc::format!($($arg)*)) };
}

macro_rules! numerical {
    ($($arg:tt)*) => { $crate::error::Error::Numerical(alloc::format!($($arg)*)) };
}

pub(crate) use {invalid, numerical, shape_err};
