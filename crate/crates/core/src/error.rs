use thiserror::Error;

/// Errors produced by the analysis pipeline and its building blocks.
#[derive(Debug, Error)]
pub enum Error {
    /// A value fell outside its admissible range (Nyquist band, modulation index, ...).
    #[error("out of range: {0}")]
    Range(String),

    /// A configuration violates one of its invariants.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The magnitude grid carries no energy, so no ridge can be traced.
    #[error("no energy")]
    NoEnergy,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A reference signal with zero energy cannot anchor an SNR.
    #[error("reference signal is all zero")]
    ZeroReference,

    #[error("parse error: {0}")]
    Parse(String),

    /// A pipeline stage failed on otherwise valid input.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("cannot read {}: {source}", path.display())]
    Open {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),
}

impl Error {
    pub(crate) fn open(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
        move |source| Error::Open { path: path.to_path_buf(), source }
    }

    /// Wraps an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage { stage, source: Box::new(e) },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
