use std::path::{Path, PathBuf};

/// Errors of the std front end.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] tcdr_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error("results store: {0}")]
    Store(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Process exit codes. Usage errors reported by the argument parser exit with 2.
pub mod exit {
    pub const OK: u8 = 0;
    pub const INTERNAL: u8 = 1;
    pub const CONFIG: u8 = 3;
    pub const DATA: u8 = 4;
    pub const CAPABILITY: u8 = 5;
    pub const IO: u8 = 6;
    pub const STORE: u8 = 7;
}

impl Error {
    pub fn exit_code(&self) -> u8 {
        use tcdr_core::Error as C;
        match self {
            Error::Config(_) => exit::CONFIG,
            Error::Io { .. } => exit::IO,
            Error::Format { .. } => exit::DATA,
            Error::Store(_) => exit::STORE,
            Error::Core(c) => match c {
                C::Config(_) | C::InvalidArgument(_) | C::OutOfRange { .. } => exit::CONFIG,
                C::Capability(_) | C::ContractMismatch { .. } => exit::CAPABILITY,
                C::Internal(_) => exit::INTERNAL,
                _ => exit::DATA,
            },
        }
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}
