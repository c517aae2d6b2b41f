use alloc::string::String;

use crate::diffnet::DerivativeLabel;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("derivative {0:?} is not available for this network")]
    UnsupportedDerivative(DerivativeLabel),

    #[error("unknown derivative label `{0}`")]
    UnknownDerivative(String),

    #[error("derivative bundle is missing {0:?}")]
    MissingDerivative(DerivativeLabel),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solution blew up at t = {time}")]
    BlowUp { time: f64 },

    #[error("non-finite training loss at iteration {iteration}: {detail}")]
    Diverged { iteration: usize, detail: String },
}
