use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid route: {0}")]
    InvalidRoute(String),
    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },
    #[error("no goal satisfies distance range [{min}, {max}]")]
    InfeasibleLevel { min: usize, max: usize },
    #[error("step called on a finished episode")]
    EpisodeFinished,
    #[error("format error: {0}")]
    Format(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("missing observation channel: {0}")]
    MissingChannel(&'static str),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("unsupported version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("config error: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Short stable tag used in machine-parsable CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidRoute(_) => "InvalidRoute",
            Error::OutOfRange { .. } => "OutOfRange",
            Error::InfeasibleLevel { .. } => "InfeasibleLevel",
            Error::EpisodeFinished => "EpisodeFinished",
            Error::Format(_) => "FormatError",
            Error::Parse { .. } => "ParseError",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::InvalidInput(_) => "InvalidInput",
            Error::MissingChannel(_) => "MissingChannel",
            Error::Shape(_) => "ShapeError",
            Error::Numerical(_) => "NumericalError",
            Error::Version { .. } => "VersionError",
            Error::Config(_) => "ConfigError",
            Error::Io { .. } => "IoError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
