use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{origin}:{line}: {message}")]
    Parse {
        origin: String,
        line: usize,
        message: String,
    },

    #[error("{origin}:{line}: duplicate entry for character '{ch}' (first seen on line {first_line})")]
    DuplicateCharacter {
        origin: String,
        line: usize,
        first_line: usize,
        ch: char,
    },

    #[error("{origin}:{line}: character '{ch}' has an empty component list")]
    EmptyComponentList { origin: String, line: usize, ch: char },

    #[error("{origin}: no entries found")]
    EmptyInput { origin: String },

    #[error("variant table maps '{component}' back onto itself through a cycle")]
    VariantCycle { component: String },

    #[error("invalid UTF-8 at byte offset {offset}")]
    InvalidUtf8 { offset: usize },

    #[error("vocabulary is empty after applying min_count = {min_count}")]
    EmptyVocabulary { min_count: u64 },

    #[error("token stream is empty")]
    EmptyStream,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value in {table} after epoch {epoch}")]
    NonFinite { table: &'static str, epoch: usize },

    #[error("at least two classes are required, found {found}")]
    TooFewClasses { found: usize },

    #[error("{0}")]
    Dimension(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn parse(origin: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            origin: origin.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
