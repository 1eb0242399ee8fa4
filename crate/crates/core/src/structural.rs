//! Correlation-structure comparison between human and predicted data.
//!
//! Both sides are scored into sub-scales, correlated pairwise, and the model
//! correlations are regressed on the human ones. The slope is the
//! amplification coefficient `k`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    attentive_rows, score_scales, score_subscales, DataError, PredictionMatrix, Registry, ResponseMatrix,
    SubscaleLayout, SubscaleScores,
};
use crate::predictors::{add_gaussian_noise, run_baseline, PredictorError, PredictorKind, PredictorSpec};
use crate::scalar::{mean, Scalar};
use crate::stats::{
    fit_line, pearson, permutation_test, AmplificationFit, CorrelationPairVector, PermutationResult,
    PermutationStatistic, SlopeModel, StatsError,
};

/// Smallest attentive subgroup the comparison accepts.
pub const MIN_SUBGROUP: usize = 30;

#[derive(Debug, Error)]
pub enum StructuralError {
    #[error("sub-scale `{0}` is not scored")]
    MissingSubscale(String),
    #[error("participant `{0}` has predictions but no human responses")]
    UnknownParticipant(String),
    #[error("attentive subgroup has {n} participants, need at least {minimum}")]
    SubgroupTooSmall { n: usize, minimum: usize },
    #[error("{selection}: only {got} usable pairs")]
    TooFewPairs { selection: &'static str, got: usize },
    #[error("noise levels must be finite, non-negative and ascending")]
    InvalidSigmas,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
}

/// Which sub-factor pairs enter the pair vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSelection {
    /// Every Big Five factor against every target sub-factor.
    Big5ByTarget,
    /// Unordered pairs of target sub-factors; no Big Five rows.
    TargetInternal,
    /// Unordered pairs of Big Five factors.
    InputInternal,
    /// Unordered pairs over all sub-factors.
    AllPairs,
}

impl PairSelection {
    pub const ALL: [PairSelection; 4] =
        [Self::Big5ByTarget, Self::TargetInternal, Self::InputInternal, Self::AllPairs];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Big5ByTarget => "big5_by_target",
            Self::TargetInternal => "target_internal",
            Self::InputInternal => "input_internal",
            Self::AllPairs => "all_pairs",
        }
    }

    /// Labels of the selected pairs, in a fixed order.
    pub fn pairs(self, layout: &SubscaleLayout) -> Vec<(String, String)> {
        fn within(ids: &[String]) -> Vec<(String, String)> {
            let mut out = Vec::new();
            for i in 0..ids.len() {
                for j in i + 1..ids.len() {
                    out.push((ids[i].clone(), ids[j].clone()));
                }
            }
            out
        }
        match self {
            Self::Big5ByTarget => layout
                .input
                .iter()
                .flat_map(|f| layout.target.iter().map(move |t| (f.clone(), t.clone())))
                .collect(),
            Self::TargetInternal => within(&layout.target),
            Self::InputInternal => within(&layout.input),
            Self::AllPairs => {
                let all: Vec<String> = layout.input.iter().chain(&layout.target).cloned().collect();
                within(&all)
            }
        }
    }
}

/// Aligned pair vector plus the pairs that had to be dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairBuild<T = f64> {
    pub vector: CorrelationPairVector<T>,
    pub dropped: Vec<(String, String)>,
}

fn column_r<T: Scalar>(scores: &SubscaleScores<T>, a: usize, b: usize) -> Option<T> {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for r in 0..scores.participant_ids.len() {
        if let (Some(x), Some(y)) = (scores.get(r, a), scores.get(r, b)) {
            xs.push(x);
            ys.push(y);
        }
    }
    pearson(&xs, &ys).ok()
}

/// Correlates each selected pair within `human` and within `model`. Pairs
/// undefined on either side (zero variance, too few rows) are dropped and
/// logged.
pub fn build_pair_vector<T: Scalar>(
    human: &SubscaleScores<T>,
    model: &SubscaleScores<T>,
    layout: &SubscaleLayout,
    sel: PairSelection,
) -> Result<PairBuild<T>, StructuralError> {
    let col = |s: &SubscaleScores<T>, id: &str| {
        s.column_index(id).ok_or_else(|| StructuralError::MissingSubscale(id.to_string()))
    };
    let (mut labels, mut hr, mut mr, mut dropped) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (a, b) in sel.pairs(layout) {
        let h = column_r(human, col(human, &a)?, col(human, &b)?);
        let m = column_r(model, col(model, &a)?, col(model, &b)?);
        match (h, m) {
            (Some(h), Some(m)) => {
                labels.push((a, b));
                hr.push(h);
                mr.push(m);
            }
            _ => {
                log::warn!("dropping pair ({a}, {b}): correlation undefined");
                dropped.push((a, b));
            }
        }
    }
    if labels.len() < 3 {
        return Err(StructuralError::TooFewPairs { selection: sel.as_str(), got: labels.len() });
    }
    Ok(PairBuild { vector: CorrelationPairVector::new(labels, hr, mr)?, dropped })
}

/// Settings shared by every structural analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub selections: Vec<PairSelection>,
    pub n_perm: usize,
    pub seed: u64,
    pub slope_model: SlopeModel,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            selections: vec![PairSelection::Big5ByTarget, PairSelection::TargetInternal],
            n_perm: 1000,
            seed: 0,
            slope_model: SlopeModel::WithIntercept,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport<T = f64> {
    pub selection: PairSelection,
    pub pairs: PairBuild<T>,
    pub fit: AmplificationFit<T>,
    /// `fit.k` or the through-origin slope, per the configured model.
    pub k: T,
    pub permutation_r_squared: PermutationResult<T>,
    pub permutation_kendall_tau: PermutationResult<T>,
}

/// Pearson r between predicted and human scores on one target sub-scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubscalePerformance<T = f64> {
    pub subscale_id: String,
    pub r: Option<T>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralReport<T = f64> {
    pub predictor_id: String,
    pub n_human: usize,
    pub n_predicted: usize,
    pub slope_model: SlopeModel,
    pub selections: Vec<SelectionReport<T>>,
    pub performance: Vec<SubscalePerformance<T>>,
    pub mean_predictive_r: Option<T>,
}

/// Human sub-scale scores: Big Five factors followed by every target sub-scale.
pub fn human_scores<T: Scalar>(dataset: &ResponseMatrix, registry: &Registry) -> Result<SubscaleScores<T>, DataError> {
    score_scales(dataset, std::iter::once(registry.input()).chain(registry.targets()))
}

fn rows_for(dataset: &ResponseMatrix, ids: &[String]) -> Result<Vec<usize>, StructuralError> {
    let index: HashMap<&str, usize> =
        dataset.participant_ids().iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();
    ids.iter()
        .map(|p| index.get(p.as_str()).copied().ok_or_else(|| StructuralError::UnknownParticipant(p.clone())))
        .collect()
}

/// Model-side scores: the participants' own Big Five factors (the model's
/// input) next to the sub-scales scored from the predicted items.
pub fn model_scores<T: Scalar>(
    dataset: &ResponseMatrix,
    predictions: &PredictionMatrix<T>,
    registry: &Registry,
) -> Result<SubscaleScores<T>, StructuralError> {
    use crate::data::ItemGrid;
    let rows = rows_for(dataset, predictions.participant_ids())?;
    let inputs = score_subscales(&dataset.select_rows(&rows), registry.input())?;
    let targets = score_scales(predictions, registry.targets())?;
    Ok(inputs.hconcat(&targets)?)
}

fn select_report<T: Scalar>(
    pairs: PairBuild<T>,
    sel: PairSelection,
    cfg: &AnalysisConfig,
) -> Result<SelectionReport<T>, StructuralError> {
    let fit = fit_line(&pairs.vector.human_r, &pairs.vector.model_r)?;
    let permutation_r_squared = permutation_test(&pairs.vector, PermutationStatistic::RSquared, cfg.n_perm, cfg.seed)?;
    let permutation_kendall_tau =
        permutation_test(&pairs.vector, PermutationStatistic::KendallTau, cfg.n_perm, cfg.seed)?;
    Ok(SelectionReport {
        selection: sel,
        k: fit.reported_k(cfg.slope_model),
        pairs,
        fit,
        permutation_r_squared,
        permutation_kendall_tau,
    })
}

/// Full structural comparison of one predictor's output against the human
/// dataset it was generated from.
pub fn analyze<T: Scalar>(
    dataset: &ResponseMatrix,
    predictions: &PredictionMatrix<T>,
    predictor_id: &str,
    registry: &Registry,
    cfg: &AnalysisConfig,
) -> Result<StructuralReport<T>, StructuralError> {
    use crate::data::ItemGrid;
    let layout = registry.layout();
    let human = human_scores::<T>(dataset, registry)?;
    let model = model_scores(dataset, predictions, registry)?;

    let mut selections = Vec::with_capacity(cfg.selections.len());
    for &sel in &cfg.selections {
        let pairs = build_pair_vector(&human, &model, &layout, sel)?;
        selections.push(select_report(pairs, sel, cfg)?);
    }

    let human_matched = human.select_rows(&rows_for(dataset, predictions.participant_ids())?);
    let mut performance = Vec::with_capacity(layout.target.len());
    for id in &layout.target {
        let h = human_matched.column(human_matched.column_index(id).ok_or_else(|| StructuralError::MissingSubscale(id.clone()))?);
        let m = model.column(model.column_index(id).ok_or_else(|| StructuralError::MissingSubscale(id.clone()))?);
        let (xs, ys): (Vec<T>, Vec<T>) = h.iter().zip(&m).filter_map(|(a, b)| Some(((*a)?, (*b)?))).unzip();
        performance.push(SubscalePerformance { subscale_id: id.clone(), r: pearson(&xs, &ys).ok(), n: xs.len() });
    }
    let defined: Vec<T> = performance.iter().filter_map(|p| p.r).collect();

    Ok(StructuralReport {
        predictor_id: predictor_id.to_string(),
        n_human: dataset.n_participants(),
        n_predicted: predictions.n_participants(),
        slope_model: cfg.slope_model,
        selections,
        mean_predictive_r: mean(&defined),
        performance,
    })
}

impl<T: Scalar> StructuralReport<T> {
    pub fn selection(&self, sel: PairSelection) -> Option<&SelectionReport<T>> {
        self.selections.iter().find(|s| s.selection == sel)
    }

    pub fn to_json(&self) -> String
    where
        T: Serialize,
    {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `selection,a,b,human_r,model_r`, one row per pair.
    pub fn pairs_csv(&self) -> Result<String, DataError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["selection", "a", "b", "human_r", "model_r"])?;
        for s in &self.selections {
            let v = &s.pairs.vector;
            for ((a, b), (h, m)) in v.labels.iter().zip(v.human_r.iter().zip(&v.model_r)) {
                w.write_record([s.selection.as_str(), a, b, &h.to_string(), &m.to_string()])?;
            }
        }
        finish(w)
    }

    /// One row per selection with the fit and both permutation p-values.
    pub fn fits_csv(&self) -> Result<String, DataError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "selection", "k", "intercept", "r_squared", "n_points", "k_through_origin", "p_r_squared",
            "p_kendall_tau", "kendall_tau",
        ])?;
        for s in &self.selections {
            let f = &s.fit;
            w.write_record([
                s.selection.as_str().to_string(),
                f.k.to_string(),
                f.intercept.to_string(),
                f.r_squared.to_string(),
                f.n_points.to_string(),
                f.k_through_origin.to_string(),
                s.permutation_r_squared.p_value.to_string(),
                s.permutation_kendall_tau.p_value.to_string(),
                s.permutation_kendall_tau.observed.to_string(),
            ])?;
        }
        finish(w)
    }

    /// `subscale,r,n`; an undefined r is an empty cell.
    pub fn performance_csv(&self) -> Result<String, DataError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["subscale", "r", "n"])?;
        for p in &self.performance {
            w.write_record([p.subscale_id.clone(), p.r.map(|r| r.to_string()).unwrap_or_default(), p.n.to_string()])?;
        }
        finish(w)
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, DataError> {
    Ok(String::from_utf8(w.into_inner()?).expect("csv output is utf-8"))
}

/// Regression of mean predictive r on k across completed reports.
pub fn performance_meta_fit<T: Scalar>(
    reports: &[StructuralReport<T>],
    sel: PairSelection,
) -> Result<AmplificationFit<T>, StructuralError> {
    let (ks, rs): (Vec<T>, Vec<T>) = reports
        .iter()
        .filter_map(|r| Some((r.selection(sel)?.k, r.mean_predictive_r?)))
        .unzip();
    Ok(fit_line(&ks, &rs)?)
}

/// Full sample against the attentive subgroup, with the subgroup's
/// correlations in the model slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentiveComparison<T = f64> {
    pub selection: PairSelection,
    pub n_full: usize,
    pub n_attentive: usize,
    pub pairs: PairBuild<T>,
    pub fit: AmplificationFit<T>,
}

pub fn attentive_comparison<T: Scalar>(
    dataset: &ResponseMatrix,
    registry: &Registry,
    sel: PairSelection,
) -> Result<AttentiveComparison<T>, StructuralError> {
    let rows = attentive_rows(dataset, registry)?;
    if rows.len() < MIN_SUBGROUP {
        return Err(StructuralError::SubgroupTooSmall { n: rows.len(), minimum: MIN_SUBGROUP });
    }
    let full = human_scores::<T>(dataset, registry)?;
    let sub = full.select_rows(&rows);
    let pairs = build_pair_vector(&full, &sub, &registry.layout(), sel)?;
    let fit = fit_line(&pairs.vector.human_r, &pairs.vector.model_r)?;
    Ok(AttentiveComparison { selection: sel, n_full: dataset.n_participants(), n_attentive: rows.len(), pairs, fit })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisePoint<T = f64> {
    pub sigma: f64,
    pub k: T,
    pub fit: AmplificationFit<T>,
}

/// Dose-response of `k` to Gaussian noise on the linear baseline.
///
/// The cross-validated linear predictions are computed once. Every noise
/// level reuses the same seed, so the noise fields are scaled copies of one
/// another and the curve reflects sigma alone.
pub fn noise_sweep<T: Scalar>(
    dataset: &ResponseMatrix,
    registry: &Registry,
    sigmas: &[f64],
    seed: u64,
    sel: PairSelection,
    slope_model: SlopeModel,
) -> Result<Vec<NoisePoint<T>>, StructuralError> {
    if sigmas.iter().any(|s| !s.is_finite() || *s < 0.0) || sigmas.windows(2).any(|w| w[0] > w[1]) {
        return Err(StructuralError::InvalidSigmas);
    }
    let spec = PredictorSpec { id: "linear".into(), kind: PredictorKind::Linear, round_to_scale: false };
    let clean = run_baseline::<T>(&spec, dataset, registry, None)?.predictions;
    let layout = registry.layout();
    let human = human_scores::<T>(dataset, registry)?;
    sigmas
        .iter()
        .map(|&sigma| {
            let noisy = add_gaussian_noise(&clean, sigma, seed);
            let model = model_scores(dataset, &noisy, registry)?;
            let pairs = build_pair_vector(&human, &model, &layout, sel)?;
            let fit = fit_line(&pairs.vector.human_r, &pairs.vector.model_r)?;
            Ok(NoisePoint { sigma, k: fit.reported_k(slope_model), fit })
        })
        .collect()
}

/// Amplification fits across prompt-order conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessSummary<T = f64> {
    pub conditions: Vec<(String, AmplificationFit<T>)>,
    /// Largest |k_a - k_b| over condition pairs.
    pub max_delta_k: T,
}

pub fn summarize_robustness<T: Scalar>(
    conditions: Vec<(String, AmplificationFit<T>)>,
    slope_model: SlopeModel,
) -> RobustnessSummary<T> {
    let ks: Vec<T> = conditions.iter().map(|(_, f)| f.reported_k(slope_model)).collect();
    let mut max_delta_k = T::zero();
    for i in 0..ks.len() {
        for j in i + 1..ks.len() {
            max_delta_k = max_delta_k.max((ks[i] - ks[j]).abs());
        }
    }
    RobustnessSummary { conditions, max_delta_k }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout(input: &[&str], target: &[&str]) -> SubscaleLayout {
        SubscaleLayout {
            input: input.iter().map(|s| s.to_string()).collect(),
            target: target.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn pair_counts() {
        let targets: Vec<String> = (0..24).map(|i| format!("T{i}")).collect();
        let l = SubscaleLayout { input: vec!["O".into(), "C".into(), "E".into(), "A".into(), "N".into()], target: targets };
        assert_eq!(PairSelection::Big5ByTarget.pairs(&l).len(), 120);
        assert_eq!(PairSelection::TargetInternal.pairs(&l).len(), 276);
        assert_eq!(PairSelection::InputInternal.pairs(&l).len(), 10);
        assert_eq!(PairSelection::AllPairs.pairs(&l).len(), 29 * 28 / 2);
        let builtin = Registry::builtin().layout();
        assert_eq!(PairSelection::Big5ByTarget.pairs(&builtin).len(), 5 * builtin.target.len());
    }

    #[test]
    fn toy_enumeration() {
        let l = layout(&["F"], &["X", "Y", "Z"]);
        let s = |p: &[(&str, &str)]| p.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect::<Vec<_>>();
        assert_eq!(PairSelection::Big5ByTarget.pairs(&l), s(&[("F", "X"), ("F", "Y"), ("F", "Z")]));
        assert_eq!(PairSelection::TargetInternal.pairs(&l), s(&[("X", "Y"), ("X", "Z"), ("Y", "Z")]));
        assert_eq!(
            PairSelection::AllPairs.pairs(&l),
            s(&[("F", "X"), ("F", "Y"), ("F", "Z"), ("X", "Y"), ("X", "Z"), ("Y", "Z")])
        );
        for sel in PairSelection::ALL {
            assert!(sel.pairs(&l).iter().all(|(a, b)| a != b));
        }
        assert!(PairSelection::TargetInternal.pairs(&l).iter().all(|(a, b)| a != "F" && b != "F"));
    }

    #[test]
    fn equal_scores_give_equal_vectors_and_drop_constants() {
        let ids: Vec<String> = (0..6).map(|i| format!("p{i}")).collect();
        let cols = ["F", "X", "Y", "Z", "K"];
        let data = [
            [1.0, 2.0, 5.0, 1.0, 3.0],
            [2.0, 1.0, 4.0, 2.0, 3.0],
            [3.0, 4.0, 2.0, 2.0, 3.0],
            [4.0, 3.0, 3.0, 5.0, 3.0],
            [5.0, 6.0, 1.0, 3.0, 3.0],
            [6.0, 5.0, 2.0, 4.0, 3.0],
        ];
        let s = SubscaleScores::new(
            ids,
            cols.iter().map(|c| c.to_string()).collect(),
            data.iter().flatten().map(|&v| Some(v)).collect(),
        )
        .unwrap();
        let l = layout(&["F"], &["X", "Y", "Z", "K"]);
        let b = build_pair_vector(&s, &s, &l, PairSelection::Big5ByTarget).unwrap();
        assert_eq!(b.vector.human_r, b.vector.model_r);
        assert_eq!(b.dropped, vec![("F".to_string(), "K".to_string())]);
        assert!(matches!(
            build_pair_vector(&s, &s, &layout(&["F"], &["Q"]), PairSelection::Big5ByTarget),
            Err(StructuralError::MissingSubscale(q)) if q == "Q"
        ));
    }

    #[test]
    fn robustness_delta() {
        let fit = |k: f64| AmplificationFit { k, intercept: 0.0, r_squared: 0.9, n_points: 10, k_through_origin: k };
        let s = summarize_robustness(
            vec![("standard".into(), fit(1.42)), ("random".into(), fit(1.41)), ("single".into(), fit(1.42))],
            SlopeModel::WithIntercept,
        );
        assert!((s.max_delta_k - 0.01).abs() < 1e-12);
    }
}
