//! Questionnaire data model: registry, response grids, scoring.

mod matrix;
mod registry;
mod scoring;

pub use matrix::{load_dataset, ItemGrid, PredictionMatrix, ResponseMatrix, SubscaleScores};
pub use registry::{
    ItemSpec, Registry, ScaleRole, ScaleSpec, SubscaleLayout, SubscaleSpec, BIG_FIVE_FACTORS,
    BIG_FIVE_ITEMS,
};
pub use scoring::{
    attentive_rows, filter_attentive, reverse_score, reverse_value, score_scales, score_subscales,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("registry: {0}")]
    Registry(String),
    #[error("column `{0}` is not declared in the registry")]
    UnknownItem(String),
    #[error("item `{0}` appears twice")]
    DuplicateItem(String),
    #[error("participant {participant}: value {value} outside the bounds of item {item}")]
    OutOfRange { participant: String, item: String, value: i32 },
    #[error("participant `{0}` appears twice")]
    DuplicateParticipant(String),
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("required column `{0}` is missing")]
    MissingColumn(String),
    #[error("registry declares no attention-check items")]
    NoAttentionItems,
    #[error("expected {expected} cells, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("participant lists differ")]
    ParticipantMismatch,
    #[error("non-finite value")]
    NonFinite,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl<W> From<csv::IntoInnerError<W>> for DataError {
    fn from(e: csv::IntoInnerError<W>) -> Self {
        DataError::Io(e.into_error())
    }
}
