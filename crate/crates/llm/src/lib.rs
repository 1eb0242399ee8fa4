//! Networked half of the LLM predictors: a chat-completion client with
//! bounded parallelism, token-bucket rate limiting, retry on malformed
//! replies and a content-addressed response cache, plus the prediction,
//! annotation and condition runs built on it.

mod backend;
mod cache;
mod harness;
mod predict;
mod suites;

pub use backend::{ChatParams, ChatReply, HttpBackend};
pub use cache::{Attempt, CacheEntry, ResponseCache};
pub use harness::{CallOutcome, Harness, RunOptions, RunStats};
pub use predict::{
    annotate_traces, extract_summaries, extract_summary, predict_llm, Annotation, LlmRun, Summaries, SummaryExtraction,
};
pub use suites::{robustness_suite, run_conditions, RobustnessRun};

use thiserror::Error;

use structamp_core::attribution::AttributionError;
use structamp_core::data::DataError;
use structamp_core::predictors::prompt::PromptError;
use structamp_core::structural::StructuralError;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("transport failure after retries: {0}")]
    Transport(String),
    #[error("request budget of {0} exhausted")]
    BudgetExceeded(u64),
    #[error("environment variable {0} holding the API token is not set")]
    MissingApiKey(String),
    #[error("invalid LLM spec: {0}")]
    InvalidSpec(String),
    #[error("{} participants have no summary (first: {})", .0.len(), .0.first().map(String::as_str).unwrap_or("?"))]
    MissingSummaries(Vec<String>),
    #[error("summary extraction for {participant_id}/{scale_id} returned neither text nor the sentinel")]
    AmbiguousReply { participant_id: String, scale_id: String },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Structural(#[from] StructuralError),
    #[error(transparent)]
    Attribution(#[from] AttributionError),
    #[error("cache i/o: {0}")]
    Io(#[from] std::io::Error),
}
