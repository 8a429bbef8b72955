use thiserror::Error;

use crate::lm::ScoreError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Top-level error. Every variant falls into one of three categories that the
/// CLI maps to exit codes (data = 1, configuration = 2, runtime = 3).
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("data error at line {line}: {message}")]
    DataLine { line: usize, message: String },

    #[error("split leakage: template `{template}` appears in both {first} and {second}")]
    SplitLeakage {
        template: String,
        first: String,
        second: String,
    },

    #[error(transparent)]
    Score(#[from] ScoreError),

    #[error(transparent)]
    Decode(#[from] crate::decode::DecodeError),

    #[error("decoding clause `{clause}` failed: {source}")]
    ClauseDecode {
        clause: crate::grammar::ClauseId,
        #[source]
        source: crate::decode::DecodeError,
    },

    #[error(transparent)]
    Grammar(#[from] crate::grammar::GrammarError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Data,
    Config,
    Runtime,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Data(_) | Error::DataLine { .. } | Error::SplitLeakage { .. } => ErrorKind::Data,
            Error::Json(_) | Error::Io { .. } => ErrorKind::Data,
            Error::Score(_) | Error::Decode(_) | Error::ClauseDecode { .. } | Error::Grammar(_) => {
                ErrorKind::Runtime
            }
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Data => 1,
            ErrorKind::Config => 2,
            ErrorKind::Runtime => 3,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
