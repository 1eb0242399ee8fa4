use serde::{Deserialize, Serialize};

use structamp_core::attribution::{summarize_conditions, ConditionResult, ConditionSummary};
use structamp_core::data::{Registry, ResponseMatrix};
use structamp_core::predictors::prompt::{InfoCondition, PromptOrder};
use structamp_core::predictors::{PredictorKind, PredictorSpec};
use structamp_core::structural::{analyze, summarize_robustness, AnalysisConfig, PairSelection, RobustnessSummary, StructuralReport};
use structamp_core::Scalar;

use crate::harness::Harness;
use crate::predict::{input_rows_complete, predict_llm, Summaries};
use crate::LlmError;

fn with(spec: &PredictorSpec, f: impl FnOnce(&mut structamp_core::predictors::LlmSpec)) -> Result<PredictorSpec, LlmError> {
    let mut out = spec.clone();
    match &mut out.kind {
        PredictorKind::Llm(l) => f(l),
        _ => return Err(LlmError::InvalidSpec(format!("predictor {} is not an LLM backend", spec.id))),
    }
    Ok(out)
}

fn primary(cfg: &AnalysisConfig) -> PairSelection {
    cfg.selections.first().copied().unwrap_or(PairSelection::Big5ByTarget)
}

/// Reports for the three prompt orders and the spread of `k` across them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRun<T = f64> {
    pub reports: Vec<(String, StructuralReport<T>)>,
    pub summary: RobustnessSummary<T>,
}

/// Runs standard, random and single-question orders under the score-only
/// condition and compares their amplification fits on the first
/// configured pair selection.
pub async fn robustness_suite<T: Scalar + Serialize>(
    spec: &PredictorSpec,
    dataset: &ResponseMatrix,
    registry: &Registry,
    harness: &Harness,
    cfg: &AnalysisConfig,
    random_seed: u64,
) -> Result<RobustnessRun<T>, LlmError> {
    let sel = primary(cfg);
    let mut reports = Vec::new();
    let mut fits = Vec::new();
    for order in [PromptOrder::Standard, PromptOrder::Random { seed: random_seed }, PromptOrder::Single] {
        let s = with(spec, |l| {
            l.order = order;
            l.condition = InfoCondition::ScoreOnly;
        })?;
        let run = predict_llm::<T>(&s, dataset, registry, &[], None, harness).await?;
        let report = analyze(dataset, &run.set.predictions, &spec.id, registry, cfg)?;
        let fit = report.selection(sel).expect("configured selection is reported").fit;
        fits.push((order.as_str().to_string(), fit));
        reports.push((order.as_str().to_string(), report));
    }
    Ok(RobustnessRun { reports, summary: summarize_robustness(fits, cfg.slope_model) })
}

/// Every predictor under every information condition, the meta-regression
/// of mean r on k across all cells, and the per-predictor ordering check.
pub async fn run_conditions<T: Scalar + Serialize>(
    specs: &[PredictorSpec],
    dataset: &ResponseMatrix,
    registry: &Registry,
    summaries: Option<&Summaries>,
    harness: &Harness,
    cfg: &AnalysisConfig,
) -> Result<(Vec<StructuralReport<T>>, ConditionSummary<T>), LlmError> {
    // Fail before any query rather than after the score-only pass.
    let missing: Vec<String> = input_rows_complete(dataset, registry)?
        .into_iter()
        .filter(|p| !summaries.is_some_and(|s| s.contains_key(p)))
        .collect();
    if !missing.is_empty() {
        return Err(LlmError::MissingSummaries(missing));
    }
    let sel = primary(cfg);
    let mut reports = Vec::new();
    let mut results = Vec::new();
    for spec in specs {
        for condition in InfoCondition::ALL {
            let s = with(spec, |l| {
                l.condition = condition;
                if l.order == PromptOrder::Single {
                    l.order = PromptOrder::Standard;
                }
            })?;
            let run = predict_llm::<T>(&s, dataset, registry, &[], summaries, harness).await?;
            let report = analyze(dataset, &run.set.predictions, &spec.id, registry, cfg)?;
            let fitted = report.selection(sel).expect("configured selection is reported");
            let mean_r = report
                .mean_predictive_r
                .ok_or_else(|| LlmError::InvalidSpec(format!("{} / {}: no defined predictive r", spec.id, condition.as_str())))?;
            results.push(ConditionResult {
                predictor_id: spec.id.clone(),
                condition,
                k: fitted.k,
                mean_r,
                fit: Some(fitted.fit),
            });
            reports.push(report);
        }
    }
    Ok((reports, summarize_conditions(results)?))
}
