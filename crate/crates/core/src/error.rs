use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The two source points of a transform fit coincide.
    #[error("degenerate geometry: source points are {separation:e} apart")]
    DegenerateGeometry { separation: f64 },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode {}: {message}", path.display())]
    Decode { path: PathBuf, message: String },

    #[error("no decodable images under {}", .0.display())]
    NoImages(PathBuf),

    #[error("unsupported index format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("incompatible index: {0}")]
    IncompatibleIndex(String),

    #[error("precision is undefined when nothing was retrieved")]
    UndefinedPrecision,

    #[error("recall is undefined when there are no relevant images")]
    UndefinedRecall,

    #[error("image id {0:?} is not present in the index")]
    MissingId(String),

    #[error("ground truth: {0}")]
    GroundTruth(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
