use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification of failures, used for CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: raw file holds {actual} bytes, header implies {expected}")]
    RawSize {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },
    #[error("{path}: malformed header: {msg}")]
    Header { path: PathBuf, msg: String },
    #[error("non-finite value at band {band}, row {row}, col {col}")]
    NonFinite { band: usize, row: usize, col: usize },
    #[error("class labels are not contiguous: missing {missing:?}")]
    LabelGap { missing: Vec<u16> },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("no labeled (non-background) pixels")]
    EmptyDataset,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no band has ABC below threshold {threshold} (minimum ABC is {min_abc:.6}); raise the threshold")]
    NoBandBelowThreshold { threshold: f64, min_abc: f64 },
    #[error("band index {index} out of range for {n_bands} bands")]
    BandOutOfRange { index: usize, n_bands: usize },
    #[error("label {label} out of range 1..={n_classes}")]
    LabelOutOfRange { label: u16, n_classes: usize },
    #[error("class {label} has {count} sample(s); at least 2 are required")]
    ClassTooSmall { label: u16, count: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("label {0} has no palette entry")]
    MissingPaletteEntry(u16),
    #[error("png encoding: {0}")]
    Png(#[from] png::EncodingError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn header(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Header {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_) => ErrorKind::Config,
            Error::Numeric(_) => ErrorKind::Numeric,
            Error::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
