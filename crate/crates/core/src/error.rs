use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain it must belong to.
    #[error("domain error: {0}")]
    Domain(String),
    /// A structurally invalid argument (dimension mismatch, empty input, bad range).
    #[error("invalid argument: {0}")]
    Argument(String),
    /// A numeric operation failed (factorization breakdown, degenerate data).
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// A density vanishes where it must be strictly positive.
    #[error("singular density: {0}")]
    Singularity(String),
    /// A scenario configuration could not be parsed or validated.
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 for usage/config problems, 3 for
    /// runtime (numeric or I/O) failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Argument(_) | Error::Config(_) => 2,
            Error::Numeric(_) | Error::Singularity(_) | Error::Io(_) => 3,
        }
    }
}
