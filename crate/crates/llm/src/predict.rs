use std::collections::{BTreeMap, HashMap};

use futures::future::try_join_all;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use structamp_core::attribution::{interpret_summary_reply, CitationMap};
use structamp_core::data::{DataError, PredictionMatrix, Registry, ResponseMatrix, ScaleSpec, BIG_FIVE_ITEMS};
use structamp_core::predictors::prompt::{
    derive_seed, prompt_hash, render_attribution_prompt, render_prompt, render_summary_extraction_prompt, InfoCondition,
    Message, PromptOrder, RenderOrder, TEMPLATE_VERSION,
};
use structamp_core::predictors::reply::{parse_attribution, parse_llm_reply, parse_single_reply};
use structamp_core::predictors::{FailedCell, LlmSpec, PredictionSet, PredictorKind, PredictorSpec, ReasoningTrace};
use structamp_core::Scalar;

use crate::backend::ChatParams;
use crate::harness::{Harness, RunStats};
use crate::LlmError;

/// Participant id → personality summary used by summary-bearing conditions.
pub type Summaries = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRun<T = f64> {
    pub set: PredictionSet<T>,
    pub traces: Vec<ReasoningTrace>,
    /// Counters for this run only; kept out of `set` so that a warm rerun
    /// yields an identical prediction set.
    pub stats: RunStats,
}

struct Job {
    row: usize,
    scale: usize,
    /// Target item for single-question prompts.
    item: Option<usize>,
    messages: Vec<Message>,
}

fn llm_spec(spec: &PredictorSpec) -> Result<&LlmSpec, LlmError> {
    let problems = spec.validate();
    if !problems.is_empty() {
        return Err(LlmError::InvalidSpec(problems.join("; ")));
    }
    match &spec.kind {
        PredictorKind::Llm(l) => Ok(l),
        other => Err(LlmError::InvalidSpec(format!("predictor {} is not an LLM backend: {other:?}", spec.id))),
    }
}

pub(crate) fn target_scales<'a>(registry: &'a Registry, scale_ids: &[String]) -> Result<Vec<&'a ScaleSpec>, LlmError> {
    if scale_ids.is_empty() {
        return Ok(registry.targets().collect());
    }
    scale_ids
        .iter()
        .map(|id| {
            registry
                .targets()
                .find(|s| &s.scale_id == id)
                .ok_or_else(|| LlmError::InvalidSpec(format!("unknown target scale {id}")))
        })
        .collect()
}

fn input_rows(dataset: &ResponseMatrix, registry: &Registry) -> Result<Vec<Option<Vec<Option<i32>>>>, LlmError> {
    let cols: Vec<usize> = registry
        .input()
        .items
        .iter()
        .map(|it| dataset.item_index(&it.item_id).ok_or_else(|| DataError::MissingColumn(it.item_id.clone())))
        .collect::<Result<_, _>>()?;
    Ok((0..dataset.n_participants())
        .map(|r| {
            let row: Vec<Option<i32>> = cols.iter().map(|&c| dataset.get(r, c)).collect();
            row.iter().all(Option::is_some).then_some(row)
        })
        .collect())
}

/// Participants whose Big Five input is complete.
pub(crate) fn input_rows_complete(dataset: &ResponseMatrix, registry: &Registry) -> Result<Vec<String>, LlmError> {
    Ok(input_rows(dataset, registry)?
        .iter()
        .zip(dataset.participant_ids())
        .filter(|(r, _)| r.is_some())
        .map(|(_, p)| p.clone())
        .collect())
}

/// Role-play predictions for every participant × target scale. Replies
/// that fail to parse are re-queried up to the spec's retry budget and
/// the cells are marked failed if none parses; the run carries on.
pub async fn predict_llm<T: Scalar>(
    spec: &PredictorSpec,
    dataset: &ResponseMatrix,
    registry: &Registry,
    scale_ids: &[String],
    summaries: Option<&Summaries>,
    harness: &Harness,
) -> Result<LlmRun<T>, LlmError> {
    let llm = llm_spec(spec)?;
    if llm.order == PromptOrder::Single && llm.condition != InfoCondition::ScoreOnly {
        return Err(LlmError::InvalidSpec("single-question order requires the score_only condition".into()));
    }
    let scales = target_scales(registry, scale_ids)?;
    let rows = input_rows(dataset, registry)?;
    let pids = dataset.participant_ids();

    if llm.condition.uses_summary() {
        let missing: Vec<String> = rows
            .iter()
            .zip(pids)
            .filter(|(r, p)| r.is_some() && !summaries.is_some_and(|s| s.contains_key(*p)))
            .map(|(_, p)| p.clone())
            .collect();
        if !missing.is_empty() {
            return Err(LlmError::MissingSummaries(missing));
        }
    }

    let item_ids: Vec<String> = scales.iter().flat_map(|s| s.items.iter().map(|i| i.item_id.clone())).collect();
    let offsets: Vec<usize> = scales
        .iter()
        .scan(0, |acc, s| {
            let o = *acc;
            *acc += s.items.len();
            Some(o)
        })
        .collect();
    let mut matrix = PredictionMatrix::<T>::empty(pids.to_vec(), item_ids.clone());
    let mut failed = Vec::new();

    let mut jobs = Vec::new();
    for (r, row) in rows.iter().enumerate() {
        let Some(responses) = row else {
            failed.extend(item_ids.iter().map(|i| FailedCell {
                participant_id: pids[r].clone(),
                item_id: i.clone(),
                reason: "incomplete Big Five input".into(),
            }));
            continue;
        };
        let summary = if llm.condition.uses_summary() { summaries.and_then(|s| s.get(&pids[r])).map(String::as_str) } else { None };
        for (si, scale) in scales.iter().enumerate() {
            let render = |order| render_prompt(registry.input(), responses, &scale.items, llm.condition, order, summary);
            match llm.order {
                PromptOrder::Standard => {
                    jobs.push(Job { row: r, scale: si, item: None, messages: render(RenderOrder::Standard)? })
                }
                PromptOrder::Random { seed } => {
                    let order = RenderOrder::Random(derive_seed(seed, &pids[r], &scale.scale_id));
                    jobs.push(Job { row: r, scale: si, item: None, messages: render(order)? })
                }
                PromptOrder::Single => {
                    for i in 0..scale.items.len() {
                        jobs.push(Job { row: r, scale: si, item: Some(i), messages: render(RenderOrder::Single(i))? });
                    }
                }
            }
        }
    }

    let params = ChatParams { model: llm.model.clone(), temperature: llm.temperature, max_tokens: llm.max_tokens };
    let before = harness.stats();
    let outcomes = try_join_all(jobs.iter().map(|job| {
        let params = &params;
        let n = scales[job.scale].items.len();
        let single = job.item.is_some();
        async move {
            harness
                .call(params, &job.messages, llm.max_retries, |text| {
                    if single {
                        parse_single_reply(text).map(|v| BTreeMap::from([(1, v)])).map_err(|e| e.to_string())
                    } else {
                        parse_llm_reply(text, n).map_err(|e| e.to_string())
                    }
                })
                .await
        }
    }))
    .await?;
    let after = harness.stats();

    let mut reasoning: BTreeMap<(usize, usize), Vec<String>> = BTreeMap::new();
    let mut digest = Sha256::new();
    for (job, out) in jobs.iter().zip(outcomes) {
        digest.update(prompt_hash(&job.messages).as_bytes());
        let scale = scales[job.scale];
        let cells: Vec<usize> = match job.item {
            Some(i) => vec![i],
            None => (0..scale.items.len()).collect(),
        };
        match out.value {
            Ok(map) => {
                for (k, &i) in cells.iter().enumerate() {
                    let v = map[&(k + 1)];
                    let item = &scale.items[i];
                    if item.contains(v) {
                        matrix.set(job.row, offsets[job.scale] + i, Some(T::of(f64::from(v))));
                    } else {
                        failed.push(FailedCell {
                            participant_id: pids[job.row].clone(),
                            item_id: item.item_id.clone(),
                            reason: format!("value {v} outside {}..={}", item.response_min, item.response_max),
                        });
                    }
                }
                if llm.reasoning {
                    let reply = out.reply.expect("accepted outcomes carry their reply");
                    reasoning.entry((job.row, job.scale)).or_default().push(reply.reasoning.unwrap_or(reply.content));
                }
            }
            Err(reason) => failed.extend(cells.iter().map(|&i| FailedCell {
                participant_id: pids[job.row].clone(),
                item_id: scale.items[i].item_id.clone(),
                reason: format!("no parsable reply after {} attempts: {reason}", out.retries + 1),
            })),
        }
    }

    let traces = reasoning
        .into_iter()
        .map(|((r, s), parts)| ReasoningTrace {
            participant_id: pids[r].clone(),
            scale_id: scales[s].scale_id.clone(),
            reasoning: parts.join("\n\n"),
            summary: None,
        })
        .collect();

    let provenance = BTreeMap::from([
        ("backend".to_string(), "llm".to_string()),
        ("model".to_string(), llm.model.clone()),
        ("condition".to_string(), llm.condition.as_str().to_string()),
        ("order".to_string(), llm.order.as_str().to_string()),
        ("temperature".to_string(), llm.temperature.to_string()),
        ("template_version".to_string(), TEMPLATE_VERSION.to_string()),
        ("calls".to_string(), jobs.len().to_string()),
        ("prompt_digest".to_string(), hex::encode(digest.finalize())),
    ]);
    Ok(LlmRun {
        set: PredictionSet { predictor_id: spec.id.clone(), predictions: matrix, failed, provenance },
        traces,
        stats: RunStats {
            requests: after.requests - before.requests,
            cache_hits: after.cache_hits - before.cache_hits,
            retries: after.retries - before.retries,
            failed_calls: after.failed_calls - before.failed_calls,
        },
    })
}

/// Summary passages of one trace, or `None` when the annotator answers
/// with the sentinel.
pub async fn extract_summary(trace: &ReasoningTrace, harness: &Harness, params: &ChatParams) -> Result<Option<String>, LlmError> {
    let messages = render_summary_extraction_prompt(&trace.reasoning)?;
    let out = harness.call(params, &messages, 0, |t| interpret_summary_reply(t).map_err(|e| e.to_string())).await?;
    out.value.map_err(|_| LlmError::AmbiguousReply {
        participant_id: trace.participant_id.clone(),
        scale_id: trace.scale_id.clone(),
    })
}

/// Summary extraction over many traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryExtraction {
    /// Input traces with `summary` filled in.
    pub traces: Vec<ReasoningTrace>,
    /// First non-empty summary per participant, in trace order.
    pub summaries: Summaries,
    /// (participant, scale) pairs whose reply was ambiguous; left for review.
    pub ambiguous: Vec<(String, String)>,
}

pub async fn extract_summaries(
    traces: &[ReasoningTrace],
    harness: &Harness,
    params: &ChatParams,
) -> Result<SummaryExtraction, LlmError> {
    let results = futures::future::join_all(traces.iter().map(|t| extract_summary(t, harness, params))).await;
    let mut out = SummaryExtraction { traces: Vec::new(), summaries: Summaries::new(), ambiguous: Vec::new() };
    for (t, res) in traces.iter().zip(results) {
        let mut t = t.clone();
        match res {
            Ok(s) => t.summary = s,
            Err(LlmError::AmbiguousReply { participant_id, scale_id }) => {
                log::warn!("ambiguous summary reply for {participant_id}/{scale_id}");
                out.ambiguous.push((participant_id, scale_id));
            }
            Err(e) => return Err(e),
        }
        if let Some(s) = &t.summary {
            out.summaries.entry(t.participant_id.clone()).or_insert_with(|| s.clone());
        }
        out.traces.push(t);
    }
    Ok(out)
}

/// Parsed citations for one trace, keyed by the models involved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub reasoning_model: String,
    pub annotation_model: String,
    pub participant_id: String,
    pub scale_id: String,
    pub citations: Option<CitationMap>,
    pub error: Option<String>,
}

/// Asks `params.model` which Big Five items each trace relied on.
pub async fn annotate_traces(
    traces: &[ReasoningTrace],
    reasoning_model: &str,
    dataset: &ResponseMatrix,
    registry: &Registry,
    harness: &Harness,
    params: &ChatParams,
    max_retries: u32,
) -> Result<Vec<Annotation>, LlmError> {
    let rows = input_rows(dataset, registry)?;
    let index: HashMap<&str, usize> = dataset.participant_ids().iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();
    let jobs = traces
        .iter()
        .map(|t| {
            let scale = registry
                .targets()
                .find(|s| s.scale_id == t.scale_id)
                .ok_or_else(|| LlmError::InvalidSpec(format!("trace for unknown scale {}", t.scale_id)))?;
            let row = index
                .get(t.participant_id.as_str())
                .and_then(|&r| rows[r].as_ref())
                .ok_or_else(|| LlmError::InvalidSpec(format!("no complete input row for {}", t.participant_id)))?;
            let messages = render_attribution_prompt(registry.input(), row, &scale.scale_id, &t.reasoning)?;
            Ok((t, scale.items.len(), messages))
        })
        .collect::<Result<Vec<_>, LlmError>>()?;
    let outcomes = try_join_all(jobs.iter().map(|(_, n, messages)| {
        harness.call(params, messages, max_retries, |text| parse_attribution(text, *n, BIG_FIVE_ITEMS).map_err(|e| e.to_string()))
    }))
    .await?;
    Ok(jobs
        .iter()
        .zip(outcomes)
        .map(|((t, _, _), out)| {
            let (citations, error) = match out.value {
                Ok(c) => (Some(c), None),
                Err(e) => (None, Some(e)),
            };
            Annotation {
                reasoning_model: reasoning_model.to_string(),
                annotation_model: params.model.clone(),
                participant_id: t.participant_id.clone(),
                scale_id: t.scale_id.clone(),
                citations,
                error,
            }
        })
        .collect())
}
