use std::cmp::Ordering;

use super::design::Design;
use super::PredictorError;
use crate::data::{PredictionMatrix, ResponseMatrix};
use crate::scalar::{compensated_sum, Scalar};

/// Mean target response of the `k` training rows nearest to `query` in
/// Euclidean distance. `exclude` drops one training row, for leave-one-out.
/// Distance ties go to the lower row index.
pub fn predict_knn<T: Scalar>(
    train: &Design<T>,
    query: &[T],
    k: usize,
    exclude: Option<usize>,
) -> Result<Vec<T>, PredictorError> {
    let n = train.n_rows();
    if n == 0 {
        return Err(PredictorError::EmptyTrainingSet);
    }
    if query.len() != train.n_inputs() {
        return Err(PredictorError::WidthMismatch { expected: train.n_inputs(), got: query.len() });
    }
    let available = n - usize::from(exclude.is_some_and(|e| e < n));
    if available == 0 {
        return Err(PredictorError::EmptyTrainingSet);
    }
    if k == 0 || k > available {
        return Err(PredictorError::TooManyNeighbours { k, available });
    }
    let mut dist: Vec<(T, usize)> = (0..n)
        .filter(|&r| Some(r) != exclude)
        .map(|r| {
            let d = compensated_sum(train.x_row(r).iter().zip(query).map(|(&a, &b)| (a - b) * (a - b)));
            (d, r)
        })
        .collect();
    dist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
    let kf = T::of_usize(k);
    Ok((0..train.n_targets())
        .map(|j| compensated_sum(dist[..k].iter().map(|&(_, r)| train.y_row(r)[j])) / kf)
        .collect())
}

/// KNN regressor over a fixed training design.
#[derive(Debug, Clone)]
pub struct KnnModel<T> {
    pub design: Design<T>,
    pub k: usize,
}

impl<T: Scalar> KnnModel<T> {
    pub fn new(design: Design<T>, k: usize) -> Result<Self, PredictorError> {
        if design.n_rows() == 0 {
            return Err(PredictorError::EmptyTrainingSet);
        }
        if k == 0 || k > design.n_rows() {
            return Err(PredictorError::TooManyNeighbours { k, available: design.n_rows() });
        }
        Ok(Self { design, k })
    }

    /// Predicts every participant of `inputs`. A participant who is also a
    /// training row is excluded from its own neighbourhood.
    pub fn predict_leave_one_out(
        &self,
        inputs: &ResponseMatrix,
        targets: &ResponseMatrix,
    ) -> Result<PredictionMatrix<T>, PredictorError> {
        let index: std::collections::HashMap<&str, usize> =
            self.design.participant_ids.iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();
        let mut out = PredictionMatrix::empty(inputs.participant_ids().to_vec(), targets.item_ids().to_vec());
        for r in 0..inputs.n_participants() {
            let Some(x) = inputs.complete_row::<T>(r) else { continue };
            let own = index.get(inputs.participant_ids()[r].as_str()).copied();
            for (c, v) in predict_knn(&self.design, &x, self.k, own)?.into_iter().enumerate() {
                out.set(r, c, Some(v));
            }
        }
        Ok(out)
    }
}
