use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("PLY parse error at header line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("PLY data error at element {index}: {message}")]
    Data { index: usize, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("cube descriptor unavailable: {0}")]
    Descriptor(String),

    #[error("no intra-source candidate cube available")]
    NoCandidate,

    #[error("intra-source cube has no points inside the hole region")]
    NoDonor,

    #[error("search box holds no points of the adjacent frame")]
    NoInterSource,

    #[error("registration failed: {0}")]
    Registration(String),

    #[error("graph construction failed: {0}")]
    Graph(String),

    #[error("singular system: slot {slot} has zero diagonal mass")]
    Singular { slot: usize },

    #[error("linear solve did not converge: {0}")]
    Solver(String),

    #[error("hole synthesis would remove {removed} of {total} points in frame {frame} (budget is 50%)")]
    CorruptionBudget {
        frame: usize,
        removed: usize,
        total: usize,
    },

    #[error("JSON error: {0}")]
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
