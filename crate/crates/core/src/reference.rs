//! Published reference values, bundled for side-by-side display in reports
//! and for format tests. Nothing in the toolkit is tuned toward them.

use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::predictors::prompt::InfoCondition;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReference {
    pub k: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Headline {
    pub k: f64,
    pub r_squared: f64,
    pub internal_k: f64,
    pub internal_r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Robustness {
    pub standard: f64,
    pub random: f64,
    pub single: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attentive {
    pub k: f64,
    pub n_full: usize,
    pub n_attentive: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseReference {
    pub sigmas: Vec<f64>,
    pub k_first: f64,
    pub k_last: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusReference {
    pub mean_pearson: f64,
    pub mean_kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineAlignment {
    pub item_pearson: f64,
    pub item_kl: f64,
    pub factor_pearson: f64,
    pub factor_kl: f64,
}

/// One (model, information condition) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCell {
    pub model: String,
    pub condition: InfoCondition,
    pub r: f64,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conditions {
    pub meta_r_squared: f64,
    pub cells: Vec<ConditionCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceValues {
    pub headline: Headline,
    pub semantic: FitReference,
    pub robustness: Robustness,
    pub attentive: Attentive,
    pub noise: NoiseReference,
    pub consensus: ConsensusReference,
    pub baseline_alignment: BaselineAlignment,
    pub conditions: Conditions,
}

const SOURCE: &str = include_str!("../fixtures/reference.toml");

static VALUES: LazyLock<ReferenceValues> =
    LazyLock::new(|| toml::from_str(SOURCE).expect("bundled reference values parse"));

pub fn reference() -> &'static ReferenceValues {
    &VALUES
}
