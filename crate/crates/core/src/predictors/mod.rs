//! Predictor backends mapping Big Five item responses to target item responses.
//!
//! Statistical baselines live here in full. LLM backends only have their
//! pure halves here (prompt rendering and reply parsing); the networked
//! harness is in the `structamp-llm` crate.

mod bayes;
mod design;
mod knn;
mod linear;
mod noisy;
pub mod prompt;
pub mod reply;
mod semantic;

pub use bayes::{train_bayesian_ridge, BayesianRidgeConfig, BayesianRidgeModel};
pub use design::{contiguous_folds, cross_val_predict, Design};
pub use knn::{predict_knn, KnnModel};
pub use linear::{train_linear, LinearModel};
pub use noisy::{add_gaussian_noise, predict_noisy_linear};
pub use semantic::{predict_semantic, SimilarityMatrix};

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, PredictionMatrix, Registry, ResponseMatrix};
use crate::scalar::Scalar;
use prompt::{InfoCondition, PromptOrder};

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("need at least {needed} complete training rows, found {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("k = {k} exceeds the {available} available neighbours")]
    TooManyNeighbours { k: usize, available: usize },
    #[error("similarity matrix has no entry for ({input}, {target})")]
    MissingSimilarity { input: String, target: String },
    #[error("similarity weights for {0} sum to zero")]
    ZeroWeightSum(String),
    #[error("invalid predictor spec: {0}")]
    InvalidSpec(String),
    #[error("input width {got} does not match model width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Parameters for an LLM role-play backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmSpec {
    pub endpoint: String,
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default)]
    pub condition: InfoCondition,
    #[serde(default)]
    pub order: PromptOrder,
    #[serde(default)]
    pub reasoning: bool,
    /// Re-queries allowed after a malformed reply.
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// Environment variable holding the bearer token.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    pub max_tokens: Option<u32>,
}

fn default_retries() -> u32 {
    3
}

fn default_key_env() -> String {
    "OPENROUTER_API_KEY".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PredictorKind {
    Llm(LlmSpec),
    Linear,
    BayesianRidge {
        #[serde(default = "default_max_iter")]
        max_iter: usize,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    Knn {
        k: usize,
    },
    Semantic {
        similarity: PathBuf,
    },
    NoisyLinear {
        sigma: f64,
        seed: u64,
    },
    /// Conditional expectation under the synthetic generating model; only
    /// meaningful for generated datasets.
    Ideal,
}

fn default_max_iter() -> usize {
    300
}

fn default_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorSpec {
    pub id: String,
    #[serde(flatten)]
    pub kind: PredictorKind,
    /// Round statistical predictions to the nearest in-range integer.
    #[serde(default)]
    pub round_to_scale: bool,
}

impl PredictorSpec {
    /// Checks parameter invariants; returns one message per violation.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.id.trim().is_empty() {
            problems.push("predictor id must not be empty".to_string());
        }
        match &self.kind {
            PredictorKind::NoisyLinear { sigma, .. } if !(*sigma >= 0.0 && sigma.is_finite()) => {
                problems.push(format!("predictor {}: sigma must be >= 0, got {sigma}", self.id));
            }
            PredictorKind::Knn { k } if *k < 1 => {
                problems.push(format!("predictor {}: k must be >= 1", self.id));
            }
            PredictorKind::Llm(llm) => {
                if !(llm.temperature >= 0.0 && llm.temperature.is_finite()) {
                    problems.push(format!("predictor {}: temperature must be >= 0", self.id));
                }
                if llm.model.trim().is_empty() {
                    problems.push(format!("predictor {}: model identifier is empty", self.id));
                }
            }
            PredictorKind::BayesianRidge { max_iter, tol }
                if (*max_iter == 0 || !(*tol > 0.0)) => {
                    problems.push(format!("predictor {}: max_iter and tol must be positive", self.id));
                }
            _ => {}
        }
        problems
    }
}

/// A cell the backend could not fill.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedCell {
    pub participant_id: String,
    pub item_id: String,
    pub reason: String,
}

/// Output of one predictor over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet<T = f64> {
    pub predictor_id: String,
    pub predictions: PredictionMatrix<T>,
    pub failed: Vec<FailedCell>,
    pub provenance: BTreeMap<String, String>,
}

/// Free-text reasoning an LLM produced for one (participant, scale) call,
/// kept for later summary extraction and attribution annotation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningTrace {
    pub participant_id: String,
    pub scale_id: String,
    pub reasoning: String,
    /// Personality summary extracted from `reasoning`; `None` until
    /// extraction runs or when the trace contains none.
    pub summary: Option<String>,
}

/// Splits a dataset into Big Five inputs and target items.
pub fn split_inputs_targets(
    dataset: &ResponseMatrix,
    registry: &Registry,
) -> Result<(ResponseMatrix, ResponseMatrix), DataError> {
    let inputs = dataset.select_items(&registry.input().item_ids())?;
    let targets = dataset.select_items(&registry.target_item_ids())?;
    Ok((inputs, targets))
}

/// Runs a statistical baseline under its evaluation protocol: 5-fold
/// cross-validation for linear and Bayesian ridge (and the noisy linear
/// variant), leave-one-out for KNN, direct evaluation for the semantic model.
pub fn run_baseline<T: Scalar>(
    spec: &PredictorSpec,
    dataset: &ResponseMatrix,
    registry: &Registry,
    similarity: Option<&SimilarityMatrix<T>>,
) -> Result<PredictionSet<T>, PredictorError> {
    let problems = spec.validate();
    if !problems.is_empty() {
        return Err(PredictorError::InvalidSpec(problems.join("; ")));
    }
    let (inputs, targets) = split_inputs_targets(dataset, registry)?;
    let mut provenance = BTreeMap::new();
    let predictions = match &spec.kind {
        PredictorKind::Linear => {
            provenance.insert("protocol".into(), "5-fold contiguous cross-validation".into());
            let design = Design::from_responses(&inputs, &targets)?;
            cross_val_predict(&design, &inputs, &targets, 5, |d| train_linear(d).map(|m| Box::new(m) as _))?
        }
        PredictorKind::BayesianRidge { max_iter, tol } => {
            provenance.insert("protocol".into(), "5-fold contiguous cross-validation".into());
            let cfg = BayesianRidgeConfig { max_iter: *max_iter, tol: *tol, ..Default::default() };
            let design = Design::from_responses(&inputs, &targets)?;
            cross_val_predict(&design, &inputs, &targets, 5, |d| {
                train_bayesian_ridge(d, &cfg).map(|(m, _)| Box::new(m) as _)
            })?
        }
        PredictorKind::NoisyLinear { sigma, seed } => {
            provenance.insert("protocol".into(), "5-fold contiguous cross-validation + gaussian noise".into());
            let design = Design::from_responses(&inputs, &targets)?;
            let clean = cross_val_predict(&design, &inputs, &targets, 5, |d| train_linear(d).map(|m| Box::new(m) as _))?;
            add_gaussian_noise(&clean, *sigma, *seed)
        }
        PredictorKind::Knn { k } => {
            provenance.insert("protocol".into(), "leave-one-out".into());
            let design = Design::from_responses(&inputs, &targets)?;
            let model = KnnModel::new(design, *k)?;
            model.predict_leave_one_out(&inputs, &targets)?
        }
        PredictorKind::Semantic { similarity: path } => {
            provenance.insert("similarity".into(), path.display().to_string());
            let sim = similarity.ok_or_else(|| {
                PredictorError::InvalidSpec(format!("predictor {} needs a similarity matrix", spec.id))
            })?;
            let target_items: Vec<_> = registry.targets().flat_map(|s| s.items.iter().cloned()).collect();
            predict_semantic(sim, &inputs, registry.input(), &target_items)?
        }
        PredictorKind::Llm(_) => {
            return Err(PredictorError::InvalidSpec(format!(
                "predictor {} is an LLM backend; run it through the harness",
                spec.id
            )))
        }
        PredictorKind::Ideal => {
            return Err(PredictorError::InvalidSpec(format!(
                "predictor {} needs the generating model; use synthgen::ideal_predictor",
                spec.id
            )))
        }
    };
    let predictions = if spec.round_to_scale { round_to_scale(&predictions, registry) } else { predictions };
    provenance.insert("kind".into(), kind_name(&spec.kind).into());
    Ok(PredictionSet { predictor_id: spec.id.clone(), predictions, failed: Vec::new(), provenance })
}

pub fn kind_name(kind: &PredictorKind) -> &'static str {
    match kind {
        PredictorKind::Llm(_) => "llm",
        PredictorKind::Linear => "linear",
        PredictorKind::BayesianRidge { .. } => "bayesian_ridge",
        PredictorKind::Knn { .. } => "knn",
        PredictorKind::Semantic { .. } => "semantic",
        PredictorKind::NoisyLinear { .. } => "noisy_linear",
        PredictorKind::Ideal => "ideal",
    }
}

/// Rounds each prediction to the nearest integer inside its item's bounds.
pub fn round_to_scale<T: Scalar>(p: &PredictionMatrix<T>, registry: &Registry) -> PredictionMatrix<T> {
    use crate::data::ItemGrid;
    let bounds: Vec<(T, T)> = p
        .item_ids()
        .iter()
        .map(|id| {
            registry
                .item(id)
                .map(|i| (T::of(f64::from(i.response_min)), T::of(f64::from(i.response_max))))
                .unwrap_or((T::neg_infinity(), T::infinity()))
        })
        .collect();
    p.map_values(|_, c, v| v.round().max(bounds[c].0).min(bounds[c].1))
}
