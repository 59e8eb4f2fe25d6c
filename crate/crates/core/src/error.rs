use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inputs disagree with each other or violate a configuration invariant.
    #[error("configuration error: {0}")]
    Config(String),

    /// A minimal sample (or a whole point set) cannot define a plane.
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    /// Argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Exemplar class + residual produced an invalid plane.
    #[error("decode error: {0}")]
    Decode(String),

    /// Synthetic scene generation gave up.
    #[error("generation error: {0}")]
    Generation(String),

    /// File contents do not follow the expected layout.
    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error category, used for exit codes and message prefixes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Degenerate,
    Domain,
    Decode,
    Generation,
    Format,
    Io,
}

impl ErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Config => "config",
            ErrorKind::Degenerate => "degenerate",
            ErrorKind::Domain => "domain",
            ErrorKind::Decode => "decode",
            ErrorKind::Generation => "generation",
            ErrorKind::Format => "format",
            ErrorKind::Io => "io",
        }
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::DegenerateSample(_) => ErrorKind::Degenerate,
            Error::Domain(_) => ErrorKind::Domain,
            Error::Decode(_) => ErrorKind::Decode,
            Error::Generation(_) => ErrorKind::Generation,
            Error::Format { .. } => ErrorKind::Format,
            Error::Io { .. } => ErrorKind::Io,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
