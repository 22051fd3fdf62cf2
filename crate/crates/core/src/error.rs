use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while validating inputs, loading traces, or writing reports.
#[derive(Debug, Error)]
pub enum Error {
    #[error("playlist is empty")]
    EmptyPlaylist,

    #[error("video {id}: {reason}")]
    InvalidVideo { id: u32, reason: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{source_name}:{line}: {reason}")]
    TraceParse {
        source_name: String,
        line: usize,
        reason: String,
    },

    #[error("{0}: trace contains no samples")]
    EmptyTrace(String),

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("user trace has {trace_len} entries but the playlist only has {playlist_len} videos")]
    UserTraceTooLong {
        trace_len: usize,
        playlist_len: usize,
    },

    #[error("policy {policy} returned an invalid decision: {reason}")]
    InvalidDecision { policy: String, reason: String },

    #[error("state audit failed at t={at:.6}s: {reason}")]
    Audit { at: f64, reason: String },

    #[error("simulation stalled at t={at:.6}s: no pending event and the policy is idle")]
    Deadlock { at: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    ConfigParse { path: PathBuf, reason: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
