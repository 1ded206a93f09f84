use std::path::PathBuf;

use thiserror::Error;

/// Problems found while reading or validating a configuration document.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing required key: {0}")]
    MissingKey(String),
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("unknown key `{key}` on line {line}")]
    UnknownKey { key: String, line: usize },
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl ConfigError {
    pub(crate) fn invalid(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// An internal consistency check failed; the run cannot continue.
    #[error("invariant violated at frame {frame}: {message}")]
    Invariant { frame: u64, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Summary(String),
}

impl SimError {
    pub(crate) fn invariant(frame: u64, message: impl Into<String>) -> Self {
        SimError::Invariant {
            frame,
            message: message.into(),
        }
    }
}
