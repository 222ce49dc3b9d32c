use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grasp rectangle: {0}")]
    InvalidRect(String),
    #[error("degenerate rectangle (width {width:.3e}, height {height:.3e})")]
    DegenerateRect { width: f64, height: f64 },
    #[error("corners do not form a parallelogram (diagonal midpoint gap {gap:.3} px)")]
    NotAParallelogram { gap: f64 },
    #[error("corner list contains a non-finite coordinate")]
    NonFiniteCorner,
    #[error("ground-truth rectangle list is empty")]
    EmptyGroundTruth,

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no admissible samples under {}", root.display())]
    EmptyDataset { root: PathBuf },
    #[error("unknown sample id {0:?}")]
    UnknownSample(String),
    #[error("{}:{line}: {reason}", path.display())]
    MalformedLabelFile {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{}: {reason}", path.display())]
    MalformedPointCloud { path: PathBuf, reason: String },
    #[error("{}: cannot decode image: {reason}", path.display())]
    ImageDecode { path: PathBuf, reason: String },

    #[error("{field} = {value} lies outside the [0, 224] frame")]
    OutOfFrame { field: &'static str, value: f64 },

    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {0}")]
    VersionUnsupported(u32),
    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    TruncatedPayload { expected: u64, actual: u64 },
    #[error("{extra} unexpected trailing bytes after payload")]
    TrailingData { extra: u64 },
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error("non-finite feature value for {id:?} at index {index}")]
    NonFiniteFeature { id: String, index: usize },
    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("cache does not belong to this head or was already consumed")]
    StaleCache,
    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(&'static str),
    #[error("non-finite parameter in {0} after optimizer step")]
    NonFiniteParameter(&'static str),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidConfig(_) => ErrorKind::Usage,
            Error::NonFiniteGradient(_)
            | Error::NonFiniteParameter(_)
            | Error::NonFiniteLoss { .. } => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}
