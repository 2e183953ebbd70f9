use alloc::string::String;

/// Errors raised by the core pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{what} out of range: {detail}")]
    OutOfRange { what: &'static str, detail: String },
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },
    #[error("non-finite value at {0}")]
    NonFinite(String),
    #[error("signal power is zero on channel {channel}; SNR is undefined")]
    ZeroPower { channel: usize },
    #[error("prompt needs {tokens} tokens, budget is {budget}")]
    TokenBudget { tokens: usize, budget: usize },
    #[error("capability missing: {0}")]
    Capability(String),
    #[error("tokenizer contract mismatch: model expects {expected}, sample carries {got}")]
    ContractMismatch { expected: String, got: String },
    #[error("dataset error: {0}")]
    Data(String),
    #[error("train/test leakage: {0} shared windows")]
    Leakage(usize),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn out_of_range(what: &'static str, detail: impl Into<String>) -> Error {
    Error::OutOfRange {
        what,
        detail: detail.into(),
    }
}
