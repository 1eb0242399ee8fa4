use std::io::Read;

use super::PredictorError;
use crate::data::{reverse_value, DataError, ItemSpec, PredictionMatrix, ResponseMatrix, ScaleSpec};
use crate::scalar::{compensated_sum, Scalar};

/// Fixed input × target similarity weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix<T = f64> {
    input_ids: Vec<String>,
    target_ids: Vec<String>,
    values: Vec<T>,
}

impl<T: Scalar> SimilarityMatrix<T> {
    pub fn new(input_ids: Vec<String>, target_ids: Vec<String>, values: Vec<T>) -> Result<Self, DataError> {
        if values.len() != input_ids.len() * target_ids.len() {
            return Err(DataError::Shape { expected: input_ids.len() * target_ids.len(), got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DataError::NonFinite);
        }
        Ok(Self { input_ids, target_ids, values })
    }

    /// CSV with header `item,<target ids...>` and one row per input item.
    pub fn read_csv<R: Read>(source: R) -> Result<Self, DataError>
    where
        T: std::str::FromStr,
    {
        let mut reader = csv::Reader::from_reader(source);
        let header = reader.headers()?.clone();
        if header.get(0) != Some("item") {
            return Err(DataError::MalformedRow { line: 1, reason: "first column must be `item`".into() });
        }
        let target_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut input_ids = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| DataError::MalformedRow { line, reason: e.to_string() })?;
            input_ids.push(rec[0].to_string());
            for cell in rec.iter().skip(1) {
                values.push(cell.trim().parse::<T>().map_err(|_| DataError::MalformedRow {
                    line,
                    reason: format!("`{cell}` is not a number"),
                })?);
            }
        }
        Self::new(input_ids, target_ids, values)
    }

    pub fn get(&self, input_id: &str, target_id: &str) -> Option<T> {
        let i = self.input_ids.iter().position(|x| x == input_id)?;
        let j = self.target_ids.iter().position(|x| x == target_id)?;
        Some(self.values[i * self.target_ids.len() + j])
    }

    pub fn input_ids(&self) -> &[String] {
        &self.input_ids
    }

    pub fn target_ids(&self) -> &[String] {
        &self.target_ids
    }
}

fn rescale<T: Scalar>(v: T, from: (i32, i32), to: (i32, i32)) -> T {
    let f = |x: i32| T::of(f64::from(x));
    f(to.0) + (v - f(from.0)) * (f(to.1) - f(to.0)) / (f(from.1) - f(from.0))
}

/// Similarity-weighted mean of the participant's reverse-scored inputs,
/// each min-max rescaled onto the target item's range. Reverse-scored
/// targets are then inverted. Missing inputs are skipped and the weights
/// renormalised over the answered ones.
pub fn predict_semantic<T: Scalar>(
    sim: &SimilarityMatrix<T>,
    inputs: &ResponseMatrix,
    input_scale: &ScaleSpec,
    targets: &[ItemSpec],
) -> Result<PredictionMatrix<T>, PredictorError> {
    let cols: Vec<(usize, &ItemSpec)> = input_scale
        .items
        .iter()
        .map(|it| {
            inputs
                .item_index(&it.item_id)
                .map(|c| (c, it))
                .ok_or_else(|| DataError::MissingColumn(it.item_id.clone()).into())
        })
        .collect::<Result<_, PredictorError>>()?;
    let weights: Vec<Vec<T>> = targets
        .iter()
        .map(|t| {
            cols.iter()
                .map(|(_, it)| {
                    sim.get(&it.item_id, &t.item_id).ok_or_else(|| PredictorError::MissingSimilarity {
                        input: it.item_id.clone(),
                        target: t.item_id.clone(),
                    })
                })
                .collect::<Result<Vec<T>, _>>()
        })
        .collect::<Result<_, _>>()?;

    let target_ids: Vec<String> = targets.iter().map(|t| t.item_id.clone()).collect();
    let mut out = PredictionMatrix::empty(inputs.participant_ids().to_vec(), target_ids);
    for r in 0..inputs.n_participants() {
        for (j, t) in targets.iter().enumerate() {
            let range = (t.response_min, t.response_max);
            let mut num = Vec::with_capacity(cols.len());
            let mut den = Vec::with_capacity(cols.len());
            for (&(c, it), &w) in cols.iter().zip(&weights[j]) {
                if let Some(v) = inputs.get(r, c) {
                    let v = reverse_value(T::of(f64::from(v)), it);
                    num.push(w * rescale(v, (it.response_min, it.response_max), range));
                    den.push(w);
                }
            }
            if den.is_empty() {
                continue;
            }
            let total = compensated_sum(den);
            if total == T::zero() {
                return Err(PredictorError::ZeroWeightSum(t.item_id.clone()));
            }
            let pred = compensated_sum(num) / total;
            out.set(r, j, Some(reverse_value(pred, t)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ItemGrid, Registry, ScaleRole, SubscaleSpec};

    fn item(id: &str, rev: bool, max: i32) -> ItemSpec {
        ItemSpec {
            item_id: id.into(),
            scale_id: "S".into(),
            text: id.into(),
            reverse_scored: rev,
            response_min: 1,
            response_max: max,
            attention_check: None,
        }
    }

    fn three_inputs() -> (ScaleSpec, ResponseMatrix) {
        let reg = Registry::builtin();
        let items = vec![item("BF01", false, 5), item("BF02", false, 5), item("BF03", true, 5)];
        let scale = ScaleSpec {
            scale_id: "BF".into(),
            name: "bf".into(),
            role: ScaleRole::Input,
            items,
            subscales: vec![SubscaleSpec { id: "X".into(), label: "x".into(), items: vec!["BF01".into(), "BF02".into(), "BF03".into()] }],
            factor_map: None,
        };
        let m = ResponseMatrix::new(
            vec!["p".into()],
            vec!["BF01".into(), "BF02".into(), "BF03".into()],
            vec![Some(5), Some(3), Some(2)],
            &reg,
        )
        .unwrap();
        (scale, m)
    }

    #[test]
    fn hand_built_three_by_two() {
        let (scale, m) = three_inputs();
        // Reverse-scored inputs: 5, 3, 4. Rescaled to 1..7: 7, 4, 5.5.
        let sim = SimilarityMatrix::<f64>::new(
            vec!["BF01".into(), "BF02".into(), "BF03".into()],
            vec!["T1".into(), "T2".into()],
            vec![0.5, 0.0, 0.25, 1.0, 0.25, 1.0],
        )
        .unwrap();
        let targets = [item("T1", false, 7), item("T2", true, 7)];
        let p = predict_semantic(&sim, &m, &scale, &targets).unwrap();
        // T1: (0.5·7 + 0.25·4 + 0.25·5.5) / 1.0 = 5.875
        assert!((p.value(0, 0).unwrap() - 5.875).abs() < 1e-12);
        // T2: (4 + 5.5) / 2 = 4.75, inverted: 8 − 4.75 = 3.25
        assert!((p.value(0, 1).unwrap() - 3.25).abs() < 1e-12);
    }

    #[test]
    fn uniform_and_one_hot() {
        let (scale, m) = three_inputs();
        let ids = vec!["BF01".to_string(), "BF02".into(), "BF03".into()];
        let targets = [item("T", false, 7)];
        let uniform = SimilarityMatrix::<f64>::new(ids.clone(), vec!["T".into()], vec![0.3; 3]).unwrap();
        let p = predict_semantic(&uniform, &m, &scale, &targets).unwrap();
        assert!((p.value(0, 0).unwrap() - (7.0 + 4.0 + 5.5) / 3.0).abs() < 1e-12);
        let one_hot = SimilarityMatrix::<f64>::new(ids.clone(), vec!["T".into()], vec![0.0, 0.0, 2.0]).unwrap();
        let p = predict_semantic(&one_hot, &m, &scale, &targets).unwrap();
        assert!((p.value(0, 0).unwrap() - 5.5).abs() < 1e-12);
        // Scaling every weight leaves the normalised mean unchanged.
        let scaled = SimilarityMatrix::<f64>::new(ids, vec!["T".into()], vec![0.6; 3]).unwrap();
        let q = predict_semantic(&scaled, &m, &scale, &targets).unwrap();
        assert!((q.value(0, 0).unwrap() - (7.0 + 4.0 + 5.5) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn missing_similarity() {
        let (scale, m) = three_inputs();
        let sim = SimilarityMatrix::<f64>::new(vec!["BF01".into()], vec!["T".into()], vec![1.0]).unwrap();
        let err = predict_semantic(&sim, &m, &scale, &[item("T", false, 7)]).unwrap_err();
        assert!(matches!(err, PredictorError::MissingSimilarity { input, .. } if input == "BF02"));
    }

    #[test]
    fn csv_round_trip() {
        let text = "item,T1,T2\nBF01,0.5,1\nBF02,0.25,0.25\n";
        let sim = SimilarityMatrix::<f64>::read_csv(text.as_bytes()).unwrap();
        assert_eq!(sim.get("BF02", "T2"), Some(0.25));
        assert!(SimilarityMatrix::<f64>::read_csv("x,T\nBF01,1\n".as_bytes()).is_err());
    }
}
