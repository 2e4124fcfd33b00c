use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corrupt file {path} at byte {pos}: {msg}")]
    Corrupt { path: PathBuf, pos: u64, msg: String },

    #[error("truncated record in {path} at byte {pos}")]
    Truncated { path: PathBuf, pos: u64 },

    #[error("frame index {index} out of range (trajectory has {n_frames} frames)")]
    FrameOutOfRange { index: usize, n_frames: usize },

    #[error("rank {rank} failed at frame {frame}: {cause}")]
    BlockRead { rank: usize, frame: usize, cause: Box<Error> },

    #[error("worker rank {rank} failed: {cause}")]
    Worker { rank: usize, cause: String },

    #[error("run aborted after {0:.1} s timeout")]
    Timeout(f64),

    #[error("wire protocol error: {0}")]
    Wire(String),

    #[error("topology {path}: line {line}: {msg}")]
    Topology { path: PathBuf, line: usize, msg: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
