use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("cannot average an empty list of boxes")]
    EmptyAverage,
}

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("failed reading input: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    BadLine { line: usize, reason: String },
}

impl StreamError {
    pub(crate) fn at(line: usize, reason: impl Into<String>) -> Self {
        Self::BadLine {
            line,
            reason: reason.into(),
        }
    }

    /// The 1-based input line an error refers to, if any.
    pub fn line(&self) -> Option<usize> {
        match self {
            Self::BadLine { line, .. } => Some(*line),
            Self::Io(_) => None,
        }
    }
}

/// An invalid parameter value. These are caller mistakes, not data errors.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

impl ConfigError {
    pub(crate) fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RpnError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("no positive or negative anchors to sample from")]
    NothingToSample,
    #[error("box encoding needs positive width and height, got {w}x{h}")]
    NonPositiveBox { w: f64, h: f64 },
    #[error("loss normalizer {name} is zero")]
    ZeroNormalizer { name: &'static str },
    #[error("probability vector is invalid: {0}")]
    BadProbabilities(String),
    #[error("box {index} has no score")]
    MissingScore { index: usize },
}

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("not a binary portable pixmap: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum AnonymizeError {
    #[error("output directory {path} is not writable: {source}")]
    OutputNotWritable { path: PathBuf, source: io::Error },
    #[error("cannot list input frames in {path}: {source}")]
    InputUnreadable { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Config(#[from] ConfigError),
}
