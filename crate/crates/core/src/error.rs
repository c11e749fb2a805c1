use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Validation { field: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} out of bounds: {detail}")]
    Bounds { what: &'static str, detail: String },

    #[error("singular system ({context}); stranded states: {states:?}")]
    Singular {
        context: String,
        /// `(n1, n2)` coordinates that cannot reach any absorbing state.
        states: Vec<(usize, usize)>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Config(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field,
            reason: reason.into(),
        }
    }

    /// True for errors raised by input checking, as opposed to numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation { .. } | Error::Bounds { .. } | Error::Config(_)
        )
    }
}
