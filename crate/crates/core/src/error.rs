use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed NIfTI header at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: String },

    #[error("unsupported NIfTI datatype code {code} (header byte 70)")]
    UnsupportedDatatype { code: i16 },

    #[error("truncated data section: need {needed} bytes from offset {offset}, file has {available}")]
    TruncatedData {
        offset: usize,
        needed: usize,
        available: usize,
    },

    #[error("non-integral label value {value} at voxel {index}")]
    NonIntegralLabel { index: usize, value: f64 },

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("empty mask: {0}")]
    EmptyMask(String),

    #[error("constant image: all in-mask voxels equal {0}")]
    ConstantImage(f64),

    #[error("zero variance inside normalization mask")]
    ZeroVariance,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("missing modality {modality} for {case}")]
    MissingModality { case: String, modality: String },

    #[error("session {0:?} does not match the session pattern")]
    UnparseableSession(String),

    #[error("non-positive time gap: {baseline} -> {followup}")]
    NonPositiveGap { baseline: String, followup: String },

    #[error("deep feature table: {0}")]
    DeepFeatures(String),

    #[error("feature table: {0}")]
    FeatureTable(String),

    #[error("training: {0}")]
    Training(String),

    #[error("width mismatch: model expects {expected} features, row has {found}")]
    WidthMismatch { expected: usize, found: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("fold assignment: {0}")]
    Folds(String),

    #[error("phantom: {0}")]
    Phantom(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether this error stems from bad input data rather than a bug.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Json(_))
    }
}
