use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },

    /// A binary or text file did not match its declared layout.
    #[error("format error: {0}")]
    Format(String),

    /// JSON or JSON Lines input that failed to parse; `line` is 1-based.
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },

    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Pose stream violated ordering rules; `position` is the 1-based event index.
    #[error("malformed pose stream at event {position}: {reason}")]
    Stream { position: usize, reason: String },

    /// De-integration removed weight that was never integrated.
    #[error("protocol violation: weight {weight} at voxel ({}, {}, {})", voxel[0], voxel[1], voxel[2])]
    Protocol { voxel: [usize; 3], weight: f64 },

    /// A de-integration request whose pose snapshot does not match what was integrated.
    #[error("protocol violation: bundle {bundle} de-integrated with a stale snapshot mismatch")]
    SnapshotMismatch { bundle: u64 },

    #[error("missing depth frame {0}")]
    MissingFrame(u64),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: io::Error) -> Self {
        Error::Io { context: context.into(), source }
    }

    /// True for errors that signal a reconstruction protocol breach rather than bad data.
    pub fn is_protocol_violation(&self) -> bool {
        matches!(self, Error::Protocol { .. } | Error::SnapshotMismatch { .. })
    }
}
