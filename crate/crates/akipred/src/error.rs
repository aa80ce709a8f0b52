use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("input file not found: {0}")]
    MissingInput(PathBuf),

    #[error("{file}: missing required column '{column}'")]
    MissingColumn { file: String, column: String },

    #[error("no documents in corpus")]
    EmptyCorpus,

    #[error("labels contain a single class only")]
    SingleClass,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("token id {id} out of range for vocabulary of size {vocab}")]
    IdOutOfRange { id: usize, vocab: usize },

    #[error("cui not present in lexicon: {0}")]
    UnknownCui(String),

    #[error("solver diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("need at least {needed} patients, found {found}")]
    TooFewPatients { needed: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("synthetic series generation failed after {0} attempts")]
    SynthExhausted(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
