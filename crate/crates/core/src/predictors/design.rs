use std::ops::Range;

use super::PredictorError;
use crate::data::{PredictionMatrix, ResponseMatrix};
use crate::scalar::Scalar;

/// A fitted model mapping one input row to one prediction per target.
pub trait Regressor<T> {
    fn n_inputs(&self) -> usize;
    fn predict_row(&self, x: &[T]) -> Vec<T>;
}

impl<T, R: Regressor<T> + ?Sized> Regressor<T> for Box<R> {
    fn n_inputs(&self) -> usize {
        (**self).n_inputs()
    }
    fn predict_row(&self, x: &[T]) -> Vec<T> {
        (**self).predict_row(x)
    }
}

/// Training data: row-major inputs `x` (n × p) and targets `y` (n × m).
#[derive(Debug, Clone, PartialEq)]
pub struct Design<T> {
    pub input_ids: Vec<String>,
    pub target_ids: Vec<String>,
    /// Participant id of each training row.
    pub participant_ids: Vec<String>,
    pub x: Vec<T>,
    pub y: Vec<T>,
}

impl<T: Scalar> Design<T> {
    pub fn new(
        input_ids: Vec<String>,
        target_ids: Vec<String>,
        participant_ids: Vec<String>,
        x: Vec<T>,
        y: Vec<T>,
    ) -> Self {
        assert_eq!(x.len(), participant_ids.len() * input_ids.len(), "x shape");
        assert_eq!(y.len(), participant_ids.len() * target_ids.len(), "y shape");
        Self { input_ids, target_ids, participant_ids, x, y }
    }

    /// Keeps participants whose inputs and targets are all present. Both
    /// matrices must list the same participants in the same order.
    pub fn from_responses(inputs: &ResponseMatrix, targets: &ResponseMatrix) -> Result<Self, PredictorError> {
        if inputs.participant_ids() != targets.participant_ids() {
            return Err(crate::data::DataError::ParticipantMismatch.into());
        }
        let mut pids = Vec::new();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for r in 0..inputs.n_participants() {
            if let (Some(xi), Some(yi)) = (inputs.complete_row::<T>(r), targets.complete_row::<T>(r)) {
                pids.push(inputs.participant_ids()[r].clone());
                x.extend(xi);
                y.extend(yi);
            }
        }
        Ok(Self::new(inputs.item_ids().to_vec(), targets.item_ids().to_vec(), pids, x, y))
    }

    pub fn n_rows(&self) -> usize {
        self.participant_ids.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.input_ids.len()
    }

    pub fn n_targets(&self) -> usize {
        self.target_ids.len()
    }

    pub fn x_row(&self, r: usize) -> &[T] {
        let p = self.n_inputs();
        &self.x[r * p..(r + 1) * p]
    }

    pub fn y_row(&self, r: usize) -> &[T] {
        let m = self.n_targets();
        &self.y[r * m..(r + 1) * m]
    }

    /// Column `j` of the targets.
    pub fn y_col(&self, j: usize) -> Vec<T> {
        (0..self.n_rows()).map(|r| self.y_row(r)[j]).collect()
    }

    pub fn select_rows(&self, rows: impl IntoIterator<Item = usize>) -> Self {
        let mut pids = Vec::new();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for r in rows {
            pids.push(self.participant_ids[r].clone());
            x.extend_from_slice(self.x_row(r));
            y.extend_from_slice(self.y_row(r));
        }
        Self::new(self.input_ids.clone(), self.target_ids.clone(), pids, x, y)
    }
}

/// Contiguous, unshuffled folds; the first `n % k` folds get one extra row.
pub fn contiguous_folds(n: usize, k: usize) -> Vec<Range<usize>> {
    let k = k.max(1);
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = n / k + usize::from(i < n % k);
        out.push(start..start + len);
        start += len;
    }
    out
}

/// Out-of-fold predictions for every participant in `inputs`.
///
/// Rows of `design` are predicted by the model trained without their fold.
/// Participants with complete inputs but incomplete targets were never in
/// training, so they are predicted by a model fit on the whole design.
/// Participants with missing inputs get missing predictions.
pub fn cross_val_predict<T, F>(
    design: &Design<T>,
    inputs: &ResponseMatrix,
    targets: &ResponseMatrix,
    n_folds: usize,
    mut train: F,
) -> Result<PredictionMatrix<T>, PredictorError>
where
    T: Scalar,
    F: FnMut(&Design<T>) -> Result<Box<dyn Regressor<T>>, PredictorError>,
{
    let n = design.n_rows();
    let mut out = PredictionMatrix::empty(inputs.participant_ids().to_vec(), targets.item_ids().to_vec());
    let row_of: std::collections::HashMap<&str, usize> =
        inputs.participant_ids().iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();
    for fold in contiguous_folds(n, n_folds) {
        let train_rows = (0..fold.start).chain(fold.end..n);
        let model = train(&design.select_rows(train_rows))?;
        for r in fold {
            let pred = model.predict_row(design.x_row(r));
            let row = row_of[design.participant_ids[r].as_str()];
            for (c, v) in pred.into_iter().enumerate() {
                out.set(row, c, Some(v));
            }
        }
    }
    let in_design: std::collections::HashSet<&str> = design.participant_ids.iter().map(String::as_str).collect();
    let outside: Vec<usize> = (0..inputs.n_participants())
        .filter(|&r| !in_design.contains(inputs.participant_ids()[r].as_str()))
        .collect();
    if !outside.is_empty() {
        let model = train(design)?;
        for r in outside {
            if let Some(x) = inputs.complete_row::<T>(r) {
                for (c, v) in model.predict_row(&x).into_iter().enumerate() {
                    out.set(r, c, Some(v));
                }
            }
        }
    }
    Ok(out)
}

/// Applies a fitted model to every participant with complete inputs.
pub fn predict_matrix<T: Scalar>(
    model: &dyn Regressor<T>,
    inputs: &ResponseMatrix,
    target_ids: &[String],
) -> Result<PredictionMatrix<T>, PredictorError> {
    if model.n_inputs() != inputs.n_items() {
        return Err(PredictorError::WidthMismatch { expected: model.n_inputs(), got: inputs.n_items() });
    }
    let mut out = PredictionMatrix::empty(inputs.participant_ids().to_vec(), target_ids.to_vec());
    for r in 0..inputs.n_participants() {
        if let Some(x) = inputs.complete_row::<T>(r) {
            for (c, v) in model.predict_row(&x).into_iter().enumerate() {
                out.set(r, c, Some(v));
            }
        }
    }
    Ok(out)
}
