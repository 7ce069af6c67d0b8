use std::io;
use thiserror::Error;

/// Errors raised across the workbench.
#[derive(Debug, Error)]
pub enum SeldError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("event bank is empty")]
    EmptyBank,

    #[error("infeasible scene constraints: {0}")]
    InfeasibleScene(String),

    #[error("source coincides with the microphone")]
    SourceAtMicrophone,

    #[error("position {0:?} lies outside the room")]
    OutsideRoom([f64; 3]),

    #[error("signal of {len} samples is shorter than one window of {window}")]
    SignalTooShort { len: usize, window: usize },

    #[error("channel count mismatch: expected {expected}, got {got}")]
    ChannelMismatch { expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("class id {class_id} out of range for {classes} classes")]
    ClassOutOfRange { class_id: usize, classes: usize },

    #[error("signal-to-noise ratio undefined: {0}")]
    UndefinedSnr(&'static str),

    #[error("no reference-active segments, error rate undefined")]
    NoReferenceEvents,

    #[error("no paired DOA estimates, DOA error undefined")]
    NoDoaPairs,

    #[error("vector is not unit norm (norm {0})")]
    NotUnitNorm(f64),

    #[error("requested {sources} sources with only {channels} channels")]
    TooManySources { sources: usize, channels: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl SeldError {
    /// Process exit code: 1 usage, 2 data, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            SeldError::InvalidArgument(_) | SeldError::TooManySources { .. } => 1,
            SeldError::NonFinite(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, SeldError>;

pub(crate) fn invalid(msg: impl Into<String>) -> SeldError {
    SeldError::InvalidArgument(msg.into())
}
