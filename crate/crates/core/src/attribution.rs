//! Attribution distributions over the Big Five input items: aggregation of
//! parsed citations, factor-level roll-up, cross-model consensus, baseline
//! comparison, and the information-condition summary.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{BIG_FIVE_FACTORS, BIG_FIVE_ITEMS};
use crate::predictors::prompt::InfoCondition;
use crate::predictors::reply::AttributionParseError;
use crate::scalar::{compensated_sum, Scalar};
use crate::stats::{fit_line, kl_divergence, pearson, AmplificationFit, KlConfig, StatsError};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AttributionError {
    #[error("attribution vector has {got} weights, expected {expected}")]
    WrongLength { expected: usize, got: usize },
    #[error("attribution weights must be finite and non-negative")]
    NegativeWeight,
    #[error("attribution weights sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("no citations to aggregate")]
    NoCitations,
    #[error("factor map has no entry for item {0}")]
    IncompleteFactorMap(String),
    #[error("consensus needs at least 2 vectors, got {0}")]
    TooFewVectors(usize),
    #[error("reply is neither a summary nor the `None` sentinel")]
    AmbiguousReply,
    #[error("condition {0} needs summaries that were not supplied")]
    MissingSummaries(String),
    #[error("attribution vectors cover different items")]
    ItemMismatch,
    #[error(transparent)]
    Parse(#[from] AttributionParseError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

const SUM_TOLERANCE: f64 = 1e-9;

fn check_simplex<T: Scalar>(w: &[T]) -> Result<(), AttributionError> {
    if w.iter().any(|v| !v.is_finite() || *v < T::zero()) {
        return Err(AttributionError::NegativeWeight);
    }
    let s = compensated_sum(w.iter().copied());
    if (s - T::one()).abs().to_f64_lossy() > SUM_TOLERANCE {
        return Err(AttributionError::NotNormalized(s.to_f64_lossy()));
    }
    Ok(())
}

/// Normalised importance over the 20 Big Five items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionVector<T = f64> {
    pub item_ids: Vec<String>,
    pub weights: Vec<T>,
    /// Number of citations aggregated; zero for model-derived vectors.
    pub support_count: usize,
}

impl<T: Scalar> AttributionVector<T> {
    pub fn new(item_ids: Vec<String>, weights: Vec<T>, support_count: usize) -> Result<Self, AttributionError> {
        if weights.len() != BIG_FIVE_ITEMS || item_ids.len() != BIG_FIVE_ITEMS {
            return Err(AttributionError::WrongLength { expected: BIG_FIVE_ITEMS, got: weights.len().min(item_ids.len()) });
        }
        check_simplex(&weights)?;
        Ok(Self { item_ids, weights, support_count })
    }

    pub fn weight(&self, item_id: &str) -> Option<T> {
        self.item_ids.iter().position(|i| i == item_id).map(|k| self.weights[k])
    }
}

/// Normalised importance over the five factors, in O, C, E, A, N order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorAttribution<T = f64> {
    pub factors: Vec<String>,
    pub weights: Vec<T>,
}

/// How a description's citations are counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CitationWeighting {
    /// Each cited item counts 1.
    #[default]
    RawCount,
    /// A description citing `c` items gives each `1/c`.
    PerDescription,
}

/// Parsed citations for one (participant, scale) annotation.
pub type CitationMap = BTreeMap<usize, BTreeSet<usize>>;

/// Item weights proportional to citation frequency across every
/// description of every map. Item indices are 1-based positions in
/// `item_ids`.
pub fn aggregate_attribution<T: Scalar>(
    maps: &[CitationMap],
    item_ids: &[String],
    weighting: CitationWeighting,
) -> Result<AttributionVector<T>, AttributionError> {
    if item_ids.len() != BIG_FIVE_ITEMS {
        return Err(AttributionError::WrongLength { expected: BIG_FIVE_ITEMS, got: item_ids.len() });
    }
    let mut counts = vec![0u64; item_ids.len()];
    // Per-description shares are exact integers over lcm(1..=n_items), so
    // aggregation order cannot matter.
    let mut shares = vec![0u128; item_ids.len()];
    let denom: u128 = (1..=item_ids.len() as u128).fold(1, lcm);
    let mut support = 0usize;
    for map in maps {
        for cited in map.values() {
            for &i in cited {
                if i == 0 || i > item_ids.len() {
                    return Err(AttributionParseError::ItemIndexOutOfRange(i).into());
                }
                counts[i - 1] += 1;
                shares[i - 1] += denom / cited.len() as u128;
                support += 1;
            }
        }
    }
    if support == 0 {
        return Err(AttributionError::NoCitations);
    }
    let raw: Vec<T> = match weighting {
        CitationWeighting::RawCount => counts.iter().map(|&c| T::of(c as f64)).collect(),
        CitationWeighting::PerDescription => shares.iter().map(|&s| T::of(s as f64)).collect(),
    };
    let total = compensated_sum(raw.iter().copied());
    let weights = raw.into_iter().map(|c| c / total).collect();
    AttributionVector::new(item_ids.to_vec(), weights, support)
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u128, b: u128) -> u128 {
    a / gcd(a, b) * b
}

/// Sums item weights within each factor. Members are added in ascending
/// order of weight, so permuting weights among a factor's items leaves the
/// factor weight bitwise unchanged.
pub fn to_factor_level<T: Scalar>(
    v: &AttributionVector<T>,
    factor_map: &BTreeMap<String, String>,
) -> Result<FactorAttribution<T>, AttributionError> {
    let mut members: Vec<Vec<T>> = vec![Vec::new(); BIG_FIVE_FACTORS.len()];
    for (id, &w) in v.item_ids.iter().zip(&v.weights) {
        let f = factor_map.get(id).ok_or_else(|| AttributionError::IncompleteFactorMap(id.clone()))?;
        let k = BIG_FIVE_FACTORS
            .iter()
            .position(|x| x == f)
            .ok_or_else(|| AttributionError::IncompleteFactorMap(id.clone()))?;
        members[k].push(w);
    }
    let weights = members
        .into_iter()
        .map(|mut ws| {
            ws.sort_by(|a, b| a.partial_cmp(b).expect("finite weights"));
            compensated_sum(ws)
        })
        .collect();
    Ok(FactorAttribution { factors: BIG_FIVE_FACTORS.iter().map(|s| s.to_string()).collect(), weights })
}

/// Pairwise agreement between labelled attribution vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusMatrix<T = f64> {
    pub labels: Vec<String>,
    /// Row-major n × n.
    pub pearson_grid: Vec<T>,
    /// Row-major n × n; entry (i, j) is D(v_i ‖ v_j).
    pub kl_grid: Vec<T>,
    pub mean_pearson: T,
    pub mean_kl: T,
}

impl<T: Scalar> ConsensusMatrix<T> {
    pub fn pearson(&self, i: usize, j: usize) -> T {
        self.pearson_grid[i * self.labels.len() + j]
    }

    pub fn kl(&self, i: usize, j: usize) -> T {
        self.kl_grid[i * self.labels.len() + j]
    }
}

/// All pairwise Pearson correlations and KL divergences. Means exclude the
/// diagonal.
pub fn consensus<T: Scalar>(
    vectors: &[(String, AttributionVector<T>)],
    kl: &KlConfig,
) -> Result<ConsensusMatrix<T>, AttributionError> {
    let n = vectors.len();
    if n < 2 {
        return Err(AttributionError::TooFewVectors(n));
    }
    if vectors.iter().any(|(_, v)| v.item_ids != vectors[0].1.item_ids) {
        return Err(AttributionError::ItemMismatch);
    }
    let mut pg = vec![T::zero(); n * n];
    let mut kg = vec![T::zero(); n * n];
    for i in 0..n {
        pg[i * n + i] = T::one();
        for j in 0..n {
            if i == j {
                continue;
            }
            let (a, b) = (&vectors[i].1.weights, &vectors[j].1.weights);
            if j > i {
                let r = pearson(a, b)?;
                pg[i * n + j] = r;
                pg[j * n + i] = r;
            }
            kg[i * n + j] = kl_divergence(a, b, kl)?;
        }
    }
    let off = |g: &[T]| {
        let vals = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| g[i * n + j]);
        compensated_sum(vals) / T::of_usize(n * (n - 1))
    };
    Ok(ConsensusMatrix {
        labels: vectors.iter().map(|(l, _)| l.clone()).collect(),
        mean_pearson: off(&pg),
        mean_kl: off(&kg),
        pearson_grid: pg,
        kl_grid: kg,
    })
}

/// Agreement of one attribution vector with the baseline importance vector
/// at item and factor granularity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineComparison<T = f64> {
    pub item_pearson: T,
    pub item_kl: T,
    pub factor_pearson: T,
    pub factor_kl: T,
    /// `factor_pearson − item_pearson`.
    pub delta_pearson: T,
}

/// KL is taken as D(llm ‖ baseline).
pub fn compare_to_baseline<T: Scalar>(
    llm: &AttributionVector<T>,
    baseline: &AttributionVector<T>,
    factor_map: &BTreeMap<String, String>,
    kl: &KlConfig,
) -> Result<BaselineComparison<T>, AttributionError> {
    if llm.item_ids != baseline.item_ids {
        return Err(AttributionError::ItemMismatch);
    }
    let item_pearson = pearson(&llm.weights, &baseline.weights)?;
    let item_kl = kl_divergence(&llm.weights, &baseline.weights, kl)?;
    let fl = to_factor_level(llm, factor_map)?;
    let fb = to_factor_level(baseline, factor_map)?;
    let factor_pearson = pearson(&fl.weights, &fb.weights)?;
    let factor_kl = kl_divergence(&fl.weights, &fb.weights, kl)?;
    Ok(BaselineComparison { item_pearson, item_kl, factor_pearson, factor_kl, delta_pearson: factor_pearson - item_pearson })
}

/// Interprets a summary-extraction reply: `None` (any case, optionally
/// quoted or with a final period) means no summary; an empty reply is
/// ambiguous; anything else is returned verbatim.
pub fn interpret_summary_reply(text: &str) -> Result<Option<String>, AttributionError> {
    let t = text.trim();
    if t.is_empty() {
        return Err(AttributionError::AmbiguousReply);
    }
    let bare = t.trim_end_matches('.').trim_matches(|c| c == '\'' || c == '"' || c == '`');
    if bare.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    Ok(Some(text.to_string()))
}

/// Amplification and predictive performance of one predictor under one
/// information condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult<T = f64> {
    pub predictor_id: String,
    pub condition: InfoCondition,
    pub k: T,
    pub mean_r: T,
    pub fit: Option<AmplificationFit<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderingOutcome {
    /// Summary+Score > ScoreOnly > SummaryOnly on mean r.
    Pass,
    /// No inversion, but at least one tie.
    Ties,
    Fail,
    /// Some condition was not run.
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    pub predictor_id: String,
    pub outcome: OrderingOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary<T = f64> {
    pub results: Vec<ConditionResult<T>>,
    /// Regression of mean r (response) on k across every cell.
    pub meta_fit: AmplificationFit<T>,
    pub ordering: Vec<OrderingCheck>,
}

fn ordering_for<T: Scalar>(cells: &[&ConditionResult<T>]) -> OrderingOutcome {
    let get = |c: InfoCondition| cells.iter().find(|r| r.condition == c).map(|r| r.mean_r);
    let (Some(both), Some(score), Some(summary)) = (
        get(InfoCondition::SummaryPlusScore),
        get(InfoCondition::ScoreOnly),
        get(InfoCondition::SummaryOnly),
    ) else {
        return OrderingOutcome::Incomplete;
    };
    if both > score && score > summary {
        OrderingOutcome::Pass
    } else if both >= score && score >= summary {
        OrderingOutcome::Ties
    } else {
        OrderingOutcome::Fail
    }
}

/// Meta-regression of r on k plus the per-predictor ordering check.
pub fn summarize_conditions<T: Scalar>(results: Vec<ConditionResult<T>>) -> Result<ConditionSummary<T>, AttributionError> {
    let k: Vec<T> = results.iter().map(|r| r.k).collect();
    let r: Vec<T> = results.iter().map(|r| r.mean_r).collect();
    let meta_fit = fit_line(&k, &r)?;
    let mut predictors: Vec<&str> = Vec::new();
    for res in &results {
        if !predictors.contains(&res.predictor_id.as_str()) {
            predictors.push(&res.predictor_id);
        }
    }
    let ordering = predictors
        .iter()
        .map(|p| {
            let cells: Vec<_> = results.iter().filter(|r| r.predictor_id == *p).collect();
            OrderingCheck { predictor_id: p.to_string(), outcome: ordering_for(&cells) }
        })
        .collect();
    Ok(ConditionSummary { results, meta_fit, ordering })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Registry;

    fn ids() -> Vec<String> {
        Registry::builtin().input().item_ids()
    }

    #[test]
    fn one_hot_and_uniform() {
        let ids = ids();
        let one = aggregate_attribution::<f64>(&[BTreeMap::from([(1, BTreeSet::from([5]))])], &ids, CitationWeighting::RawCount).unwrap();
        assert_eq!(one.weights[4], 1.0);
        assert_eq!(one.weights.iter().filter(|&&w| w == 0.0).count(), 19);
        let all: BTreeSet<usize> = (1..=20).collect();
        let maps = vec![BTreeMap::from([(1, all.clone()), (2, all)])];
        let uni = aggregate_attribution::<f64>(&maps, &ids, CitationWeighting::RawCount).unwrap();
        assert!(uni.weights.iter().all(|&w| w == 0.05));
        assert_eq!(uni.support_count, 40);
        assert_eq!(
            aggregate_attribution::<f64>(&[BTreeMap::from([(1, BTreeSet::new())])], &ids, CitationWeighting::RawCount),
            Err(AttributionError::NoCitations)
        );
    }

    #[test]
    fn per_description_weighting() {
        let ids = ids();
        let maps = vec![BTreeMap::from([(1, BTreeSet::from([1, 2])), (2, BTreeSet::from([1]))])];
        let raw = aggregate_attribution::<f64>(&maps, &ids, CitationWeighting::RawCount).unwrap();
        let per = aggregate_attribution::<f64>(&maps, &ids, CitationWeighting::PerDescription).unwrap();
        assert!((raw.weights[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((per.weights[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn factor_level_one_hot_and_uniform() {
        let reg = Registry::builtin();
        let ids = ids();
        let mut w = vec![0.0; 20];
        w[0] = 1.0;
        let v = AttributionVector::new(ids.clone(), w, 1).unwrap();
        let f = to_factor_level(&v, reg.factor_map()).unwrap();
        let e = BIG_FIVE_FACTORS.iter().position(|&x| x == reg.factor_map()["BF01"]).unwrap();
        assert_eq!(f.weights[e], 1.0);
        let uniform = AttributionVector::new(ids, vec![0.05f64; 20], 1).unwrap();
        let fu = to_factor_level(&uniform, reg.factor_map()).unwrap();
        assert!(fu.weights.iter().all(|&x| (x - 0.2).abs() < 1e-15));
        let mut partial = reg.factor_map().clone();
        partial.remove("BF07");
        assert_eq!(to_factor_level(&uniform, &partial), Err(AttributionError::IncompleteFactorMap("BF07".into())));
    }

    #[test]
    fn consensus_of_identical_vectors() {
        let ids = ids();
        let w: Vec<f64> = (1..=20).map(|i| i as f64 / 210.0).collect();
        let v = AttributionVector::new(ids, w, 0).unwrap();
        let c = consensus(&[("a".into(), v.clone()), ("b".into(), v)], &KlConfig::default()).unwrap();
        assert_eq!(c.mean_pearson, 1.0);
        assert_eq!(c.mean_kl, 0.0);
    }

    #[test]
    fn summary_sentinel() {
        assert_eq!(interpret_summary_reply("None"), Ok(None));
        assert_eq!(interpret_summary_reply(" 'None'.\n"), Ok(None));
        assert_eq!(interpret_summary_reply(""), Err(AttributionError::AmbiguousReply));
        assert_eq!(interpret_summary_reply("Overall, calm."), Ok(Some("Overall, calm.".into())));
    }

    #[test]
    fn identical_conditions_report_ties() {
        let cells = InfoCondition::ALL
            .iter()
            .map(|&c| ConditionResult { predictor_id: "m".into(), condition: c, k: 1.2, mean_r: 0.4, fit: None })
            .chain([ConditionResult { predictor_id: "n".into(), condition: InfoCondition::ScoreOnly, k: 1.4, mean_r: 0.5, fit: None }])
            .collect();
        let s = summarize_conditions::<f64>(cells).unwrap();
        assert_eq!(s.ordering[0].outcome, OrderingOutcome::Ties);
        assert_eq!(s.ordering[1].outcome, OrderingOutcome::Incomplete);
    }
}
