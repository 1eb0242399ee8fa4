use serde::{Deserialize, Serialize};

use super::design::{Design, Regressor};
use super::PredictorError;
use crate::linalg::{cholesky, cholesky_solve};
use crate::scalar::{compensated_sum, Scalar};

/// Independent OLS fits, one per target, sharing the same inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel<T = f64> {
    pub input_ids: Vec<String>,
    pub target_ids: Vec<String>,
    /// Row `j` holds the coefficients of target `j` (m × p, row-major).
    pub coef: Vec<T>,
    pub intercept: Vec<T>,
    /// Set when the normal equations were singular and a tiny ridge term
    /// was added.
    pub regularized: bool,
}

impl<T: Scalar> LinearModel<T> {
    pub fn coefficients(&self, target: usize) -> &[T] {
        let p = self.input_ids.len();
        &self.coef[target * p..(target + 1) * p]
    }
}

impl<T: Scalar> Regressor<T> for LinearModel<T> {
    fn n_inputs(&self) -> usize {
        self.input_ids.len()
    }

    fn predict_row(&self, x: &[T]) -> Vec<T> {
        (0..self.target_ids.len())
            .map(|j| self.intercept[j] + compensated_sum(self.coefficients(j).iter().zip(x).map(|(&b, &v)| b * v)))
            .collect()
    }
}

/// Column means and the centred copy of a row-major matrix.
pub(crate) fn center<T: Scalar>(a: &[T], rows: usize, cols: usize) -> (Vec<T>, Vec<T>) {
    let means: Vec<T> = (0..cols)
        .map(|j| compensated_sum((0..rows).map(|r| a[r * cols + j])) / T::of_usize(rows))
        .collect();
    let centred = a.iter().enumerate().map(|(i, &v)| v - means[i % cols]).collect();
    (means, centred)
}

/// Fits OLS with intercept for every target column.
pub fn train_linear<T: Scalar>(design: &Design<T>) -> Result<LinearModel<T>, PredictorError> {
    let (n, p, m) = (design.n_rows(), design.n_inputs(), design.n_targets());
    if n < p + 1 {
        return Err(PredictorError::TooFewRows { needed: p + 1, got: n });
    }
    let (x_mean, xc) = center(&design.x, n, p);
    let (y_mean, yc) = center(&design.y, n, m);
    let mut g = crate::linalg::gram(&xc, n, p);

    let mut regularized = false;
    let l = match cholesky(&g, p, T::of(1e-12)) {
        Some(l) => l,
        None => {
            let trace = compensated_sum((0..p).map(|i| g[i * p + i]));
            let lambda = T::of(1e-8) * (trace / T::of_usize(p)).max(T::one());
            for i in 0..p {
                g[i * p + i] = g[i * p + i] + lambda;
            }
            regularized = true;
            log::warn!("normal equations are singular; refitting with ridge term {lambda}");
            cholesky(&g, p, T::zero()).expect("ridge-regularised Gram matrix is positive definite")
        }
    };

    let mut coef = Vec::with_capacity(m * p);
    let mut intercept = Vec::with_capacity(m);
    for j in 0..m {
        let yj: Vec<T> = (0..n).map(|r| yc[r * m + j]).collect();
        let b = crate::linalg::xt_y(&xc, n, p, &yj);
        let w = cholesky_solve(&l, p, &b);
        intercept.push(y_mean[j] - compensated_sum(w.iter().zip(&x_mean).map(|(&a, &b)| a * b)));
        coef.extend(w);
    }
    Ok(LinearModel {
        input_ids: design.input_ids.clone(),
        target_ids: design.target_ids.clone(),
        coef,
        intercept,
        regularized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn design(n: usize, p: usize, f: impl Fn(&[f64]) -> Vec<f64>, m: usize, seed: u64) -> Design<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let row: Vec<f64> = (0..p).map(|_| f64::from(rng.random_range(1..=5))).collect();
            y.extend(f(&row));
            x.extend(row);
        }
        Design::new(
            (0..p).map(|i| format!("x{i}")).collect(),
            (0..m).map(|i| format!("y{i}")).collect(),
            (0..n).map(|i| format!("p{i}")).collect(),
            x,
            y,
        )
    }

    #[test]
    fn recovers_exact_linear_map() {
        let d = design(60, 4, |r| vec![0.5 + 2.0 * r[0] - r[3], 3.0], 2, 1);
        let model = train_linear(&d).unwrap();
        let want = [2.0, 0.0, 0.0, -1.0];
        for (a, b) in model.coefficients(0).iter().zip(want) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        assert!((model.intercept[0] - 0.5).abs() < 1e-8);
        // Constant target.
        assert!(model.coefficients(1).iter().all(|c| c.abs() < 1e-12));
        assert!((model.intercept[1] - 3.0).abs() < 1e-12);
        assert!(!model.regularized);
    }

    #[test]
    fn too_few_rows() {
        let d = design(4, 4, |r| vec![r[0]], 1, 2);
        assert!(matches!(train_linear(&d), Err(PredictorError::TooFewRows { needed: 5, got: 4 })));
    }

    #[test]
    fn duplicated_column_falls_back_to_ridge() {
        let mut d = design(30, 3, |r| vec![r[0] + r[1]], 1, 3);
        for r in 0..30 {
            d.x[r * 3 + 2] = d.x[r * 3];
        }
        let model = train_linear(&d).unwrap();
        assert!(model.regularized);
        let pred = model.predict_row(d.x_row(0));
        assert!((pred[0] - d.y_row(0)[0]).abs() < 1e-4);
    }
}
