use std::path::PathBuf;

/// Errors raised anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shapes, widths or settings that cannot work together.
    #[error("configuration error: {0}")]
    Config(String),
    /// Caller misuse: invalid indices, empty sequences, missing arguments.
    #[error("usage error: {0}")]
    Usage(String),
    /// A value outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// NaN or infinity appeared where finite values are required.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// The tabular oracle would need more states than allowed.
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// Normalisation against a zero reference value.
    #[error("division error: {0}")]
    Division(String),
    /// A config or checkpoint line that failed validation.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category used by the command-line front end.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) | Error::Parse { .. } => "config",
            Error::Usage(_) => "usage",
            Error::Domain(_) => "domain",
            Error::Numeric(_) => "numeric",
            Error::Infeasible(_) => "infeasible",
            Error::Division(_) => "division",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
