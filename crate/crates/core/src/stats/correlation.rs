use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::data::SubscaleScores;
use crate::scalar::{compensated_sum, Scalar};

pub(crate) fn check_pair<T: Scalar>(x: &[T], y: &[T], min_len: usize) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < min_len {
        return Err(StatsError::TooFewPoints { needed: min_len, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

fn is_constant<T: Scalar>(v: &[T]) -> bool {
    v.iter().all(|&a| a == v[0])
}

/// Centered second moments `(sxx, sxy, syy)` and the means.
pub(crate) fn moments<T: Scalar>(x: &[T], y: &[T]) -> (T, T, T, T, T) {
    let n = T::of_usize(x.len());
    let mx = compensated_sum(x.iter().copied()) / n;
    let my = compensated_sum(y.iter().copied()) / n;
    let sxx = compensated_sum(x.iter().map(|&a| (a - mx) * (a - mx)));
    let syy = compensated_sum(y.iter().map(|&b| (b - my) * (b - my)));
    let sxy = compensated_sum(x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)));
    (mx, my, sxx, sxy, syy)
}

/// Sample Pearson correlation.
pub fn pearson<T: Scalar>(x: &[T], y: &[T]) -> Result<T, StatsError> {
    check_pair(x, y, 3)?;
    if is_constant(x) || is_constant(y) {
        return Err(StatsError::ZeroVariance);
    }
    let (_, _, sxx, sxy, syy) = moments(x, y);
    let denom = (sxx * syy).sqrt();
    if denom <= T::zero() {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / denom).max(-T::one()).min(T::one()))
}

/// Correlation grid between the sub-scales of two score sets.
///
/// Rows are `a`'s sub-scales, columns `b`'s. Participants are matched by id;
/// each cell uses every participant with both values present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix<T = f64> {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    values: Vec<Option<T>>,
    n_per_cell: Vec<usize>,
}

impl<T: Scalar> CorrelationMatrix<T> {
    pub fn get(&self, row: usize, col: usize) -> Option<T> {
        self.values[row * self.col_labels.len() + col]
    }

    pub fn n(&self, row: usize, col: usize) -> usize {
        self.n_per_cell[row * self.col_labels.len() + col]
    }

    pub fn lookup(&self, row: &str, col: &str) -> Option<Option<T>> {
        let r = self.row_labels.iter().position(|l| l == row)?;
        let c = self.col_labels.iter().position(|l| l == col)?;
        Some(self.get(r, c))
    }
}

pub fn correlation_matrix<T: Scalar>(
    scores_a: &SubscaleScores<T>,
    scores_b: &SubscaleScores<T>,
) -> Result<CorrelationMatrix<T>, StatsError> {
    let b_rows: HashMap<&str, usize> =
        scores_b.participant_ids.iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();
    let shared: Vec<(usize, usize)> = scores_a
        .participant_ids
        .iter()
        .enumerate()
        .filter_map(|(i, p)| b_rows.get(p.as_str()).map(|&j| (i, j)))
        .collect();
    if shared.len() < 3 {
        return Err(StatsError::NoSharedParticipants { shared: shared.len() });
    }

    let (na, nb) = (scores_a.subscale_ids.len(), scores_b.subscale_ids.len());
    let mut values = Vec::with_capacity(na * nb);
    let mut n_per_cell = Vec::with_capacity(na * nb);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for ca in 0..na {
        for cb in 0..nb {
            xs.clear();
            ys.clear();
            for &(ra, rb) in &shared {
                if let (Some(x), Some(y)) = (scores_a.get(ra, ca), scores_b.get(rb, cb)) {
                    xs.push(x);
                    ys.push(y);
                }
            }
            n_per_cell.push(xs.len());
            values.push(pearson(&xs, &ys).ok());
        }
    }
    Ok(CorrelationMatrix {
        row_labels: scores_a.subscale_ids.clone(),
        col_labels: scores_b.subscale_ids.clone(),
        values,
        n_per_cell,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pearson_examples() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        // sxy = 3, sxx = 2, syy = 14/3  ->  3 / sqrt(28/3)
        let expected = 3.0 / (28.0f64 / 3.0).sqrt();
        assert_relative_eq!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap(), expected, epsilon = 1e-15);
        assert_relative_eq!(expected, 0.981_980_506_061_965_7, epsilon = 1e-15);
    }

    #[test]
    fn pearson_errors() {
        assert!(matches!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(StatsError::ZeroVariance)));
        assert!(matches!(pearson(&[1.0, 2.0], &[1.0, 2.0]), Err(StatsError::TooFewPoints { .. })));
        assert!(matches!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]), Err(StatsError::LengthMismatch { .. })));
        assert!(matches!(pearson(&[1.0, f64::NAN, 3.0], &[1.0, 2.0, 3.0]), Err(StatsError::NonFinite)));
    }

    #[test]
    fn pearson_f32() {
        let r = pearson(&[1.0f32, 2.0, 3.0, 5.0], &[2.0f32, 4.0, 6.0, 10.0]).unwrap();
        assert!((r - 1.0).abs() < 1e-6);
    }

    fn scores(ids: &[&str], cols: &[&str], values: Vec<Option<f64>>) -> SubscaleScores<f64> {
        SubscaleScores::new(
            ids.iter().map(|s| s.to_string()).collect(),
            cols.iter().map(|s| s.to_string()).collect(),
            values,
        )
        .unwrap()
    }

    #[test]
    fn self_matrix_is_symmetric_with_unit_diagonal() {
        let s = scores(
            &["a", "b", "c", "d"],
            &["X", "Y", "Z"],
            [1.0, 2.0, 0.5, 2.0, 1.0, 0.7, 3.0, 5.0, 0.1, 4.0, 3.0, 0.9].into_iter().map(Some).collect(),
        );
        let m = correlation_matrix(&s, &s).unwrap();
        for i in 0..3 {
            assert_relative_eq!(m.get(i, i).unwrap(), 1.0, epsilon = 1e-12);
            for j in 0..3 {
                assert_eq!(m.get(i, j), m.get(j, i));
                assert_eq!(m.n(i, j), 4);
            }
        }
    }

    #[test]
    fn pairwise_deletion_and_matching_by_id() {
        let a = scores(&["a", "b", "c", "d"], &["X"], vec![Some(1.0), Some(2.0), Some(3.0), None]);
        // b lists participants in a different order and adds an unknown one.
        let b = scores(&["d", "c", "b", "a", "zz"], &["Y"], vec![Some(9.0), Some(30.0), Some(20.0), Some(10.0), Some(0.0)]);
        let m = correlation_matrix(&a, &b).unwrap();
        assert_eq!(m.n(0, 0), 3);
        assert_relative_eq!(m.get(0, 0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn too_few_shared() {
        let a = scores(&["a", "b"], &["X"], vec![Some(1.0), Some(2.0)]);
        assert!(matches!(correlation_matrix(&a, &a), Err(StatsError::NoSharedParticipants { shared: 2 })));
    }

    #[test]
    fn constant_column_gives_missing_cell() {
        let a = scores(&["a", "b", "c"], &["X", "K"], vec![Some(1.0), Some(2.0), Some(2.0), Some(2.0), Some(3.0), Some(2.0)]);
        let m = correlation_matrix(&a, &a).unwrap();
        assert_eq!(m.get(0, 1), None);
        assert_eq!(m.lookup("X", "X"), Some(Some(1.0)));
    }
}
