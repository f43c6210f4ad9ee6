use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: expected length {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("format error in {path} at byte offset {offset}: {reason}")]
    Format {
        path: PathBuf,
        offset: u64,
        reason: String,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("model has not observed any class")]
    EmptyModel,

    #[error("matrix is not positive definite (pivot {pivot}, value {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("singular rank-one update: denominator {denominator:e}")]
    SingularUpdate { denominator: f64 },

    #[error("augmentation unsupported: {0}")]
    UnsupportedAugmentation(String),

    #[error("at stream position {position}: {source}")]
    AtStep {
        position: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Process exit status classes used by the command-line front end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numerical => 4,
        }
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::UnsupportedAugmentation(_) => ErrorClass::Config,
            Error::Shape { .. }
            | Error::Data(_)
            | Error::Format { .. }
            | Error::InsufficientData(_)
            | Error::EmptyModel
            | Error::Io { .. } => ErrorClass::Data,
            Error::NotPositiveDefinite { .. } | Error::SingularUpdate { .. } => {
                ErrorClass::Numerical
            }
            Error::AtStep { source, .. } => source.class(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.class().exit_code()
    }

    pub(crate) fn at_step(self, position: usize) -> Error {
        Error::AtStep {
            position,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, offset: u64, reason: impl Into<String>) -> Error {
        Error::Format {
            path: path.into(),
            offset,
            reason: reason.into(),
        }
    }
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Shape { expected, actual })
    }
}
