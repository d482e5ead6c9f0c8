use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    VersionUnsupported(u16),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("duplicate protein id {0:?}")]
    DuplicateId(String),

    #[error("empty protein id")]
    EmptyId,

    #[error("non-finite value in record {id:?} at index {index}")]
    NonFiniteValue { id: String, index: usize },

    #[error("truncated file: {0}")]
    TruncatedFile(String),

    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),

    #[error("invalid protein id: {0}")]
    InvalidId(String),

    #[error("expected {expected} modality, got {actual}")]
    WrongModality { expected: String, actual: String },

    #[error("datasets share {0} protein ids; at least 2 are required")]
    EmptyIntersection(usize),

    #[error("need at least {required} ids to split, got {actual}")]
    TooFewIds { required: usize, actual: usize },

    #[error("no FASTA records found")]
    NoRecords,

    #[error("malformed FASTA header: {0:?}")]
    MalformedHeader(String),

    #[error("empty input")]
    EmptyInput,

    #[error("invalid head config: {0}")]
    InvalidConfig(String),

    #[error("degenerate projection output (norm {0:e})")]
    DegenerateOutput(f64),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("need at least 2 proteins, got {0}")]
    TooFewProteins(usize),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("zero variance input")]
    ZeroVariance,

    #[error("score lists cover different protein ids: {0}")]
    IdSetMismatch(String),

    #[error("unknown protein id {0:?}")]
    UnknownId(String),

    #[error("retrieval index is empty")]
    EmptyIndex,

    #[error("no description for protein {0:?}")]
    MissingDescription(String),

    #[error("bad synthetic dimensions: {0}")]
    BadDims(String),

    #[error("unknown preset {0:?}")]
    UnknownPreset(String),

    #[error("summarizer failure: {0}")]
    Summarizer(String),

    #[error("manifest error in {path}: {message}")]
    Manifest { path: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable code, used in structured CLI error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::FileNotFound(_) => "FileNotFound",
            Error::Io { .. } => "IoFailure",
            Error::BadMagic { .. } => "BadMagic",
            Error::VersionUnsupported(_) => "VersionUnsupported",
            Error::DimMismatch { .. } => "DimMismatch",
            Error::DuplicateId(_) => "DuplicateId",
            Error::EmptyId => "EmptyId",
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::TruncatedFile(_) => "TruncatedFile",
            Error::TrailingBytes(_) => "TrailingBytes",
            Error::InvalidId(_) => "InvalidId",
            Error::WrongModality { .. } => "WrongModality",
            Error::EmptyIntersection(_) => "EmptyIntersection",
            Error::TooFewIds { .. } => "TooFewIds",
            Error::NoRecords => "NoRecords",
            Error::MalformedHeader(_) => "MalformedHeader",
            Error::EmptyInput => "EmptyInput",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::DegenerateOutput(_) => "DegenerateOutput",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::EmptyBatch => "EmptyBatch",
            Error::ConfigMismatch(_) => "ConfigMismatch",
            Error::TooFewProteins(_) => "TooFewProteins",
            Error::LengthMismatch(..) => "LengthMismatch",
            Error::ZeroVariance => "ZeroVariance",
            Error::IdSetMismatch(_) => "IdSetMismatch",
            Error::UnknownId(_) => "UnknownId",
            Error::EmptyIndex => "EmptyIndex",
            Error::MissingDescription(_) => "MissingDescription",
            Error::BadDims(_) => "BadDims",
            Error::UnknownPreset(_) => "UnknownPreset",
            Error::Summarizer(_) => "SummarizerFailure",
            Error::Manifest { .. } => "ManifestError",
        }
    }

    /// True for failures caused by the caller's inputs rather than by the
    /// computation itself.
    pub fn is_user_error(&self) -> bool {
        !matches!(
            self,
            Error::DegenerateOutput(_) | Error::Summarizer(_) | Error::Io { .. }
        )
    }
}
