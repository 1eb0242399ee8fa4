//! Reverse scoring, sub-scale means, and attention filtering.

use super::{DataError, ItemGrid, ItemSpec, Registry, ResponseMatrix, ScaleSpec, SubscaleScores};
use crate::scalar::{compensated_sum, Scalar};

/// Reflects a response on a reverse-scored item: `min + max - value`.
pub fn reverse_score(value: i32, item: &ItemSpec) -> Result<i32, DataError> {
    if !item.contains(value) {
        return Err(DataError::OutOfRange {
            participant: String::new(),
            item: item.item_id.clone(),
            value,
        });
    }
    Ok(if item.reverse_scored { item.response_min + item.response_max - value } else { value })
}

/// Real-valued counterpart of [`reverse_score`], used for predictions, which
/// may leave the item range.
pub fn reverse_value<T: Scalar>(value: T, item: &ItemSpec) -> T {
    if item.reverse_scored {
        T::of(f64::from(item.response_min + item.response_max)) - value
    } else {
        value
    }
}

/// Scores every sub-scale of `scale` as the mean of its reverse-scored member
/// items. A cell is computed when at least half of the members are answered,
/// otherwise it is missing.
pub fn score_subscales<T, G>(grid: &G, scale: &ScaleSpec) -> Result<SubscaleScores<T>, DataError>
where
    T: Scalar,
    G: ItemGrid<T> + ?Sized,
{
    let members: Vec<Vec<(usize, &ItemSpec)>> = scale
        .subscales
        .iter()
        .map(|sub| {
            sub.items
                .iter()
                .map(|id| {
                    let col = grid.item_index(id).ok_or_else(|| DataError::MissingColumn(id.clone()))?;
                    Ok((col, scale.item(id).expect("registry validated")))
                })
                .collect::<Result<Vec<_>, DataError>>()
        })
        .collect::<Result<_, _>>()?;

    let n = grid.participant_ids().len();
    let mut values = Vec::with_capacity(n * members.len());
    let mut answered = Vec::new();
    for row in 0..n {
        for sub in &members {
            answered.clear();
            answered.extend(
                sub.iter().filter_map(|&(col, item)| grid.value(row, col).map(|v| reverse_value(v, item))),
            );
            values.push(if answered.len() * 2 >= sub.len() && !answered.is_empty() {
                Some(compensated_sum(answered.iter().copied()) / T::of_usize(answered.len()))
            } else {
                None
            });
        }
    }
    SubscaleScores::new(grid.participant_ids().to_vec(), scale.subscale_ids(), values)
}

/// Scores several scales and concatenates their sub-scales left to right.
pub fn score_scales<'a, T, G>(
    grid: &G,
    scales: impl IntoIterator<Item = &'a ScaleSpec>,
) -> Result<SubscaleScores<T>, DataError>
where
    T: Scalar,
    G: ItemGrid<T> + ?Sized,
{
    let mut acc = SubscaleScores::new(grid.participant_ids().to_vec(), Vec::new(), Vec::new())?;
    for scale in scales {
        acc = acc.hconcat(&score_subscales(grid, scale)?)?;
    }
    Ok(acc)
}

/// Row indices of participants who give the expected response on every
/// attention-check item.
pub fn attentive_rows(matrix: &ResponseMatrix, registry: &Registry) -> Result<Vec<usize>, DataError> {
    let checks = registry
        .attention_items()
        .map(|item| {
            let col = matrix.item_index(&item.item_id)
                .ok_or_else(|| DataError::MissingColumn(item.item_id.clone()))?;
            Ok((col, item.attention_check.expect("filtered")))
        })
        .collect::<Result<Vec<_>, DataError>>()?;
    if checks.is_empty() {
        return Err(DataError::NoAttentionItems);
    }
    Ok((0..matrix.n_participants())
        .filter(|&r| checks.iter().all(|&(c, expected)| matrix.get(r, c) == Some(expected)))
        .collect())
}

/// Keeps participants who pass every attention check; row order is preserved.
pub fn filter_attentive(matrix: &ResponseMatrix, registry: &Registry) -> Result<ResponseMatrix, DataError> {
    Ok(matrix.select_rows(&attentive_rows(matrix, registry)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ScaleRole, SubscaleSpec};
    use proptest::prelude::*;

    fn item(id: &str, reverse: bool, min: i32, max: i32) -> ItemSpec {
        ItemSpec {
            item_id: id.into(),
            scale_id: "S".into(),
            text: id.into(),
            reverse_scored: reverse,
            response_min: min,
            response_max: max,
            attention_check: None,
        }
    }

    #[test]
    fn reverse_examples() {
        assert_eq!(reverse_score(1, &item("a", true, 1, 5)).unwrap(), 5);
        assert_eq!(reverse_score(3, &item("a", true, 1, 5)).unwrap(), 3);
        assert_eq!(reverse_score(2, &item("a", true, 1, 7)).unwrap(), 6);
        assert_eq!(reverse_score(2, &item("a", false, 1, 7)).unwrap(), 2);
        assert!(reverse_score(0, &item("a", true, 1, 7)).is_err());
    }

    proptest! {
        #[test]
        fn reverse_is_an_involution(min in -3i32..3, width in 1i32..10, offset in 0i32..10, rev: bool) {
            let it = item("a", rev, min, min + width);
            let v = min + offset % (width + 1);
            prop_assert_eq!(reverse_score(reverse_score(v, &it).unwrap(), &it).unwrap(), v);
        }
    }

    fn two_item_scale() -> (ScaleSpec, Registry) {
        let reg = Registry::builtin();
        let scale = ScaleSpec {
            scale_id: "S".into(),
            name: "s".into(),
            role: ScaleRole::Target,
            items: vec![item("BF01", false, 1, 5), item("BF06", true, 1, 5)],
            subscales: vec![SubscaleSpec { id: "X".into(), label: "x".into(), items: vec!["BF01".into(), "BF06".into()] }],
            factor_map: None,
        };
        (scale, reg)
    }

    #[test]
    fn subscale_mean_with_reversal() {
        let (scale, reg) = two_item_scale();
        let m = ResponseMatrix::new(vec!["p".into()], vec!["BF01".into(), "BF06".into()], vec![Some(1), Some(5)], &reg).unwrap();
        let s: SubscaleScores<f64> = score_subscales(&m, &scale).unwrap();
        assert_eq!(s.get(0, 0), Some(1.0));
    }

    #[test]
    fn constant_factor_scores_constant() {
        let reg = Registry::builtin();
        let e_items: Vec<String> = ["BF01", "BF06", "BF11", "BF16"].iter().map(|s| s.to_string()).collect();
        let m = ResponseMatrix::new(vec!["p".into()], e_items.clone(), vec![Some(4), Some(2), Some(4), Some(2)], &reg).unwrap();
        let scale = ScaleSpec { subscales: vec![reg.input().subscales[2].clone()], ..reg.input().clone() };
        assert_eq!(scale.subscales[0].id, "E");
        let s: SubscaleScores<f64> = score_subscales(&m, &scale).unwrap();
        assert_eq!(s.get(0, 0), Some(4.0));
    }

    #[test]
    fn missing_policy_half_rule() {
        let (scale, reg) = two_item_scale();
        let m = ResponseMatrix::new(
            vec!["half".into(), "none".into()],
            vec!["BF01".into(), "BF06".into()],
            vec![Some(2), None, None, None],
            &reg,
        )
        .unwrap();
        let s: SubscaleScores<f64> = score_subscales(&m, &scale).unwrap();
        assert_eq!(s.get(0, 0), Some(2.0));
        assert_eq!(s.get(1, 0), None);
    }

    #[test]
    fn missing_column_is_an_error() {
        let (scale, reg) = two_item_scale();
        let m = ResponseMatrix::new(vec!["p".into()], vec!["BF01".into()], vec![Some(1)], &reg).unwrap();
        assert!(matches!(score_subscales::<f64, _>(&m, &scale), Err(DataError::MissingColumn(c)) if c == "BF06"));
    }

    #[test]
    fn all_minimum_scores_minimum() {
        let reg = Registry::builtin();
        let scale = reg.targets().next().unwrap();
        let fwd: Vec<&ItemSpec> = scale.items.iter().filter(|i| !i.reverse_scored).collect();
        let ids: Vec<String> = fwd.iter().map(|i| i.item_id.clone()).collect();
        let m = ResponseMatrix::new(vec!["p".into()], ids.clone(), vec![Some(1); ids.len()], &reg).unwrap();
        let only_fwd = ScaleSpec {
            subscales: vec![SubscaleSpec { id: "F".into(), label: "f".into(), items: ids }],
            ..scale.clone()
        };
        let s: SubscaleScores<f64> = score_subscales(&m, &only_fwd).unwrap();
        assert_eq!(s.get(0, 0), Some(1.0));
    }

    fn attention_matrix(rows: &[(i32, i32)]) -> (ResponseMatrix, Registry) {
        let reg = Registry::builtin();
        let pids = (0..rows.len()).map(|i| format!("p{i}")).collect();
        let values = rows.iter().flat_map(|&(a, b)| [Some(a), Some(b)]).collect();
        (ResponseMatrix::new(pids, vec!["ATT01".into(), "ATT02".into()], values, &reg).unwrap(), reg)
    }

    #[test]
    fn filter_attentive_examples() {
        let (all_pass, reg) = attention_matrix(&[(4, 1), (4, 1)]);
        assert_eq!(filter_attentive(&all_pass, &reg).unwrap(), all_pass);

        let (m, reg) = attention_matrix(&[(4, 1), (3, 1), (4, 1)]);
        let f = filter_attentive(&m, &reg).unwrap();
        assert_eq!(f.participant_ids(), &["p0".to_string(), "p2".to_string()]);
        assert_eq!(filter_attentive(&f, &reg).unwrap(), f);
    }

    #[test]
    fn filter_needs_check_columns() {
        let reg = Registry::builtin();
        let m = ResponseMatrix::new(vec!["p".into()], vec!["BF01".into()], vec![Some(1)], &reg).unwrap();
        assert!(matches!(filter_attentive(&m, &reg), Err(DataError::MissingColumn(_))));
    }
}
