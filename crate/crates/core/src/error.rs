use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, NpcError>;

#[derive(Debug, Error)]
pub enum NpcError {
    #[error("file not found: {0}")]
    NotFound(PathBuf),
    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error("audio too short: {samples} samples, need at least {needed}")]
    TooShort { samples: usize, needed: usize },
    #[error("stream too short: {frames} frames, need at least {needed}")]
    StreamTooShort { frames: usize, needed: usize },
    #[error("impostor sampling needs at least one other usable stream")]
    NoOtherStream,
    #[error("not enough distinct speakers: {0}")]
    InsufficientSpeakers(String),
    #[error("missing features for stream `{0}`")]
    MissingFeatures(String),
    #[error("window [{start}, {end}) out of range for stream `{source_id}` with {frames} frames")]
    OutOfRange {
        source_id: String,
        start: usize,
        end: usize,
        frames: usize,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("max pooling needs even extents, got {height}x{width}")]
    OddExtent { height: usize, width: usize },
    #[error("batch-norm training needs a batch of at least 2, got {0}")]
    DegenerateBatch(usize),
    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("non-finite loss at batch {batch}")]
    NonFiniteLoss { batch: usize },
    #[error("no data: {0}")]
    EmptyData(String),
    #[error("cosine loss undefined for a zero-norm embedding")]
    ZeroNormEmbedding,
    #[error("weight mirroring needs a cross-entropy classifier head")]
    WrongLossKind,
    #[error("unsupported format version: {0}")]
    VersionMismatch(String),
    #[error("checksum mismatch")]
    ChecksumMismatch,
    #[error("pooling needs at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("no enrolled vectors")]
    EmptyEnrollment,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("speaker `{speaker}` has {available} utterances, need {needed}")]
    InsufficientUtterances {
        speaker: String,
        available: usize,
        needed: usize,
    },
    #[error("cosine score undefined for a zero-norm vector")]
    ZeroNormVector,
    #[error("trial set needs at least one target and one non-target")]
    DegenerateTrials,
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl NpcError {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        NpcError::ShapeMismatch(msg.into())
    }
}
