use std::path::PathBuf;

use thiserror::Error;

use crate::lexicon::SenseId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input record. `line` is 1-based; 0 when the error is not tied to a line.
    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("unknown sense {0}")]
    UnknownSense(SenseId),

    #[error("cannot build query for {sense}: no cuewords left after conflict filtering")]
    UnbuildableQuery { sense: SenseId },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing prerequisite for stage `{stage}`: {artifact}")]
    Prerequisite { stage: String, artifact: String },

    #[error("transport error for {uri}: {message}")]
    Transport { uri: String, message: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Prerequisite { .. }
            | Error::UnknownSense(_)
            | Error::UnbuildableQuery { .. }
            | Error::Io { .. } => 3,
            Error::Transport { .. } => 4,
            Error::Stage { source, .. } => source.exit_code(),
            Error::Format { .. }
            | Error::Degenerate(_)
            | Error::Range(_)
            | Error::Input(_) => 5,
        }
    }
}
