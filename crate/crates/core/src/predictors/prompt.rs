//! Prompt rendering for the role-play, attribution, and summary-extraction
//! tasks. Template text lives in `templates/v1/` and is compiled in; the
//! renderer substitutes `{{name}}` placeholders in a single pass, so values
//! that themselves contain braces are never re-expanded.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::data::{ItemSpec, ScaleSpec};

/// Version tag of the compiled-in template set.
pub const TEMPLATE_VERSION: &str = "v1";

const SCORE_ONLY_SYSTEM: &str = include_str!("../../templates/v1/score_only.system.txt");
const SUMMARY_PLUS_SCORE_SYSTEM: &str = include_str!("../../templates/v1/summary_plus_score.system.txt");
const SUMMARY_ONLY_SYSTEM: &str = include_str!("../../templates/v1/summary_only.system.txt");
const SINGLE_SYSTEM: &str = include_str!("../../templates/v1/single.system.txt");
const SINGLE_USER: &str = include_str!("../../templates/v1/single.user.txt");
const ATTRIBUTION_USER: &str = include_str!("../../templates/v1/attribution.user.txt");
const SUMMARY_EXTRACTION_USER: &str = include_str!("../../templates/v1/summary_extraction.user.txt");

/// Verbal anchors for the five input response levels, lowest first.
pub const INPUT_ANCHORS: [&str; 5] = ["Strongly Disagree", "Disagree", "Neutral", "Agree", "Strongly Agree"];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("no response for input item {0}")]
    MissingItem(String),
    #[error("condition {0:?} needs a summary")]
    SummaryRequired(InfoCondition),
    #[error("condition {0:?} does not take a summary")]
    SummaryForbidden(InfoCondition),
    #[error("input item {item} has {levels} response levels; the anchors cover 5")]
    UnsupportedScale { item: String, levels: i32 },
    #[error("single-question prompts are only defined for the score-only condition")]
    SingleNeedsScoreOnly,
    #[error("target item index {index} out of range for {len} items")]
    TargetIndex { index: usize, len: usize },
    #[error("template placeholder {{{{{0}}}}} has no value")]
    UnboundPlaceholder(String),
    #[error("expected {expected} input responses, got {got}")]
    ResponseCount { expected: usize, got: usize },
}

/// Which participant information the predictor sees.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoCondition {
    #[default]
    ScoreOnly,
    SummaryOnly,
    SummaryPlusScore,
}

impl InfoCondition {
    pub const ALL: [InfoCondition; 3] =
        [InfoCondition::ScoreOnly, InfoCondition::SummaryOnly, InfoCondition::SummaryPlusScore];

    pub fn uses_summary(self) -> bool {
        !matches!(self, InfoCondition::ScoreOnly)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            InfoCondition::ScoreOnly => "score_only",
            InfoCondition::SummaryOnly => "summary_only",
            InfoCondition::SummaryPlusScore => "summary_plus_score",
        }
    }
}

/// Presentation order as configured for a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptOrder {
    #[default]
    Standard,
    /// Input statements shuffled per trial; the trial seed is derived from
    /// this base seed, the participant and the scale.
    Random { seed: u64 },
    /// One prompt per target item.
    Single,
}

impl PromptOrder {
    pub fn as_str(&self) -> &'static str {
        match self {
            PromptOrder::Standard => "standard",
            PromptOrder::Random { .. } => "random",
            PromptOrder::Single => "single",
        }
    }
}

/// Presentation order for one rendered prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderOrder {
    Standard,
    Random(u64),
    /// Zero-based index into the target items.
    Single(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }
}

/// Pretty JSON array of `{"role", "content"}` objects, the canonical form
/// for golden files and cache keys.
pub fn messages_to_json(messages: &[Message]) -> String {
    serde_json::to_string_pretty(messages).expect("messages serialise")
}

/// Hex SHA-256 of the canonical JSON form.
pub fn prompt_hash(messages: &[Message]) -> String {
    hex::encode(Sha256::digest(messages_to_json(messages).as_bytes()))
}

/// Single-pass `{{name}}` substitution.
pub fn render_template(template: &str, vars: &[(&str, &str)]) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let Some(end) = after.find("}}") else {
            out.push_str(&rest[start..]);
            return Ok(out);
        };
        let name = &after[..end];
        let value = vars
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| PromptError::UnboundPlaceholder(name.to_string()))?;
        out.push_str(value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Verbal anchor for a response on a five-level input item.
pub fn anchor(item: &ItemSpec, value: i32) -> Result<&'static str, PromptError> {
    if item.levels() != 5 {
        return Err(PromptError::UnsupportedScale { item: item.item_id.clone(), levels: item.levels() });
    }
    if !item.contains(value) {
        return Err(PromptError::MissingItem(item.item_id.clone()));
    }
    Ok(INPUT_ANCHORS[(value - item.response_min) as usize])
}

fn profile_entries<'a>(
    input: &'a ScaleSpec,
    responses: &[Option<i32>],
) -> Result<Vec<(&'a ItemSpec, &'static str)>, PromptError> {
    if responses.len() != input.items.len() {
        return Err(PromptError::ResponseCount { expected: input.items.len(), got: responses.len() });
    }
    input
        .items
        .iter()
        .zip(responses)
        .map(|(item, v)| {
            let v = v.ok_or_else(|| PromptError::MissingItem(item.item_id.clone()))?;
            Ok((item, anchor(item, v)?))
        })
        .collect()
}

/// Seeded permutation of `0..n`: indices sorted by
/// `sha256(seed_le ‖ index_le)`. Chosen over an RNG shuffle so the order is
/// reproducible from any language with a SHA-256 implementation.
pub fn shuffled_order(n: usize, seed: u64) -> Vec<usize> {
    let mut keyed: Vec<([u8; 32], usize)> = (0..n)
        .map(|i| {
            let mut h = Sha256::new();
            h.update(seed.to_le_bytes());
            h.update((i as u64).to_le_bytes());
            (h.finalize().into(), i)
        })
        .collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// Lines of the form `text: Anchor`, in registry order or shuffled.
pub fn render_profile(input: &ScaleSpec, responses: &[Option<i32>], shuffle_seed: Option<u64>) -> Result<String, PromptError> {
    let mut entries = profile_entries(input, responses)?;
    if let Some(seed) = shuffle_seed {
        let order = shuffled_order(entries.len(), seed);
        entries = order.into_iter().map(|i| entries[i]).collect();
    }
    Ok(entries.iter().map(|(item, a)| format!("{}: {a}", item.text)).collect::<Vec<_>>().join("\n"))
}

/// `Description N: text` lines for the target items, numbered from 1.
pub fn render_descriptions(targets: &[ItemSpec]) -> String {
    targets
        .iter()
        .enumerate()
        .map(|(i, t)| format!("Description {}: {}", i + 1, t.text))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Renders the system/user pair for one role-play query.
///
/// `responses` is aligned with `input.items`. Single-question mode renders
/// the prompt for `targets[i]` only.
pub fn render_prompt(
    input: &ScaleSpec,
    responses: &[Option<i32>],
    targets: &[ItemSpec],
    condition: InfoCondition,
    order: RenderOrder,
    summary: Option<&str>,
) -> Result<Vec<Message>, PromptError> {
    match (condition.uses_summary(), summary) {
        (true, None) => return Err(PromptError::SummaryRequired(condition)),
        (false, Some(_)) => return Err(PromptError::SummaryForbidden(condition)),
        _ => {}
    }
    let shuffle = match order {
        RenderOrder::Random(seed) => Some(seed),
        _ => None,
    };
    // The profile is validated even when the condition hides it.
    let profile = render_profile(input, responses, shuffle)?;
    let summary = summary.unwrap_or("");

    if let RenderOrder::Single(index) = order {
        if condition != InfoCondition::ScoreOnly {
            return Err(PromptError::SingleNeedsScoreOnly);
        }
        let target = targets.get(index).ok_or(PromptError::TargetIndex { index, len: targets.len() })?;
        return Ok(vec![
            Message::system(render_template(SINGLE_SYSTEM, &[("profile", &profile)])?),
            Message::user(render_template(SINGLE_USER, &[("item", &target.text)])?),
        ]);
    }

    let template = match condition {
        InfoCondition::ScoreOnly => SCORE_ONLY_SYSTEM,
        InfoCondition::SummaryOnly => SUMMARY_ONLY_SYSTEM,
        InfoCondition::SummaryPlusScore => SUMMARY_PLUS_SCORE_SYSTEM,
    };
    let system = render_template(template, &[("profile", &profile), ("summary", summary)])?;
    Ok(vec![Message::system(system), Message::user(render_descriptions(targets))])
}

/// Annotation prompt asking which input items a reasoning trace relied on.
pub fn render_attribution_prompt(
    input: &ScaleSpec,
    responses: &[Option<i32>],
    scale_label: &str,
    reasoning: &str,
) -> Result<Vec<Message>, PromptError> {
    let profile = profile_entries(input, responses)?
        .iter()
        .enumerate()
        .map(|(i, (item, a))| format!("Item {}: {}: {a}", i + 1, item.text))
        .collect::<Vec<_>>()
        .join("\n");
    let text = render_template(
        ATTRIBUTION_USER,
        &[("scale", scale_label), ("profile", &profile), ("reasoning", reasoning)],
    )?;
    Ok(vec![Message::user(text)])
}

/// Prompt asking a model to copy out the summary passages of a trace.
pub fn render_summary_extraction_prompt(reasoning: &str) -> Result<Vec<Message>, PromptError> {
    Ok(vec![Message::user(render_template(SUMMARY_EXTRACTION_USER, &[("reasoning", reasoning)])?)])
}

/// Per-trial shuffle seed: the first eight bytes of
/// `sha256(base ‖ participant ‖ scale)`, little endian.
pub fn derive_seed(base: u64, participant_id: &str, scale_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update(participant_id.as_bytes());
    h.update([0u8]);
    h.update(scale_id.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}
