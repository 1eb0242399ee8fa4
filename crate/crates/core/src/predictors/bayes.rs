use serde::{Deserialize, Serialize};

use super::design::{Design, Regressor};
use super::linear::center;
use super::PredictorError;
use crate::attribution::AttributionVector;
use crate::linalg::{gram, symmetric_eigen, xt_y};
use crate::scalar::{compensated_sum, Scalar};

/// Evidence-maximisation settings. The four gamma hyper-prior parameters
/// default to the usual non-informative 1e-6.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesianRidgeConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub alpha_1: f64,
    pub alpha_2: f64,
    pub lambda_1: f64,
    pub lambda_2: f64,
}

impl Default for BayesianRidgeConfig {
    fn default() -> Self {
        Self { max_iter: 300, tol: 1e-6, alpha_1: 1e-6, alpha_2: 1e-6, lambda_1: 1e-6, lambda_2: 1e-6 }
    }
}

/// Per-target Bayesian ridge fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesianRidgeModel<T = f64> {
    pub input_ids: Vec<String>,
    pub target_ids: Vec<String>,
    /// m × p, row-major.
    pub coef: Vec<T>,
    pub intercept: Vec<T>,
    /// Noise precision per target.
    pub alpha: Vec<T>,
    /// Weight precision per target.
    pub lambda: Vec<T>,
    /// Iterations used per target.
    pub iterations: Vec<usize>,
    /// False if any target hit `max_iter` before the tolerance was met.
    pub converged: bool,
}

impl<T: Scalar> BayesianRidgeModel<T> {
    pub fn coefficients(&self, target: usize) -> &[T] {
        let p = self.input_ids.len();
        &self.coef[target * p..(target + 1) * p]
    }
}

impl<T: Scalar> Regressor<T> for BayesianRidgeModel<T> {
    fn n_inputs(&self) -> usize {
        self.input_ids.len()
    }

    fn predict_row(&self, x: &[T]) -> Vec<T> {
        (0..self.target_ids.len())
            .map(|j| self.intercept[j] + compensated_sum(self.coefficients(j).iter().zip(x).map(|(&b, &v)| b * v)))
            .collect()
    }
}

/// Fits each target by evidence maximisation and derives input importance
/// as the mean absolute standardised coefficient across targets,
/// normalised to sum to one.
pub fn train_bayesian_ridge<T: Scalar>(
    design: &Design<T>,
    cfg: &BayesianRidgeConfig,
) -> Result<(BayesianRidgeModel<T>, AttributionVector<T>), PredictorError> {
    let (n, p, m) = (design.n_rows(), design.n_inputs(), design.n_targets());
    if n < p + 1 {
        return Err(PredictorError::TooFewRows { needed: p + 1, got: n });
    }
    let (x_mean, xc) = center(&design.x, n, p);
    let (y_mean, yc) = center(&design.y, n, m);
    // One eigendecomposition of XᵀX serves every target and iteration.
    let (eig, vecs) = symmetric_eigen(&gram(&xc, n, p), p);
    let eig: Vec<T> = eig.into_iter().map(|e| e.max(T::zero())).collect();

    let (a1, a2, l1, l2) = (T::of(cfg.alpha_1), T::of(cfg.alpha_2), T::of(cfg.lambda_1), T::of(cfg.lambda_2));
    let two = T::of(2.0);
    let nf = T::of_usize(n);
    let tol = T::of(cfg.tol);

    let mut model = BayesianRidgeModel {
        input_ids: design.input_ids.clone(),
        target_ids: design.target_ids.clone(),
        coef: Vec::with_capacity(m * p),
        intercept: Vec::with_capacity(m),
        alpha: Vec::with_capacity(m),
        lambda: Vec::with_capacity(m),
        iterations: Vec::with_capacity(m),
        converged: true,
    };

    for j in 0..m {
        let yj: Vec<T> = (0..n).map(|r| yc[r * m + j]).collect();
        let yy = compensated_sum(yj.iter().map(|&v| v * v));
        let b = xt_y(&xc, n, p, &yj);
        // Projection of Xᵀy onto the eigenbasis.
        let bt: Vec<T> = (0..p).map(|k| compensated_sum((0..p).map(|i| vecs[i * p + k] * b[i]))).collect();

        let var = yy / nf;
        let mut alpha = T::one() / (var + T::epsilon());
        let mut lambda = T::one();
        // Posterior mean in the eigenbasis for the current precisions.
        let solve = |alpha: T, lambda: T| -> Vec<T> {
            (0..p).map(|k| bt[k] / (eig[k] + lambda / alpha)).collect::<Vec<T>>()
        };
        let to_coef = |wt: &[T]| -> Vec<T> {
            (0..p).map(|i| compensated_sum((0..p).map(|k| vecs[i * p + k] * wt[k]))).collect()
        };

        let mut prev: Option<Vec<T>> = None;
        let mut iterations = cfg.max_iter;
        let mut converged = false;
        for it in 0..cfg.max_iter {
            let wt = solve(alpha, lambda);
            let w = to_coef(&wt);
            if let Some(prev) = &prev {
                let delta = compensated_sum(prev.iter().zip(&w).map(|(a, b)| (*a - *b).abs()));
                if delta < tol {
                    iterations = it;
                    converged = true;
                    break;
                }
            }
            // ‖w‖² is invariant under the orthogonal basis change.
            let ww = compensated_sum(wt.iter().map(|&v| v * v));
            let sse = (yy - two * compensated_sum(wt.iter().zip(&bt).map(|(&a, &b)| a * b))
                + compensated_sum(wt.iter().zip(&eig).map(|(&a, &e)| e * a * a)))
            .max(T::zero());
            let gamma = compensated_sum(eig.iter().map(|&e| alpha * e / (lambda + alpha * e)));
            lambda = (gamma + two * l1) / (ww + two * l2);
            alpha = (nf - gamma + two * a1) / (sse + two * a2);
            prev = Some(w);
        }
        if !converged {
            log::warn!("bayesian ridge for target {} stopped at max_iter = {}", design.target_ids[j], cfg.max_iter);
            model.converged = false;
        }
        let w = to_coef(&solve(alpha, lambda));
        model.intercept.push(y_mean[j] - compensated_sum(w.iter().zip(&x_mean).map(|(&a, &b)| a * b)));
        model.coef.extend(w);
        model.alpha.push(alpha);
        model.lambda.push(lambda);
        model.iterations.push(iterations);
    }

    let importance = standardized_importance(&model, &xc, &yc, n)?;
    Ok((model, importance))
}

fn standardized_importance<T: Scalar>(
    model: &BayesianRidgeModel<T>,
    xc: &[T],
    yc: &[T],
    n: usize,
) -> Result<AttributionVector<T>, PredictorError> {
    let p = model.input_ids.len();
    let m = model.target_ids.len();
    let nf = T::of_usize(n);
    let sd = |a: &[T], cols: usize, j: usize| (compensated_sum((0..n).map(|r| a[r * cols + j] * a[r * cols + j])) / nf).sqrt();
    let sd_x: Vec<T> = (0..p).map(|i| sd(xc, p, i)).collect();
    let mut acc = vec![T::zero(); p];
    let mut used = 0usize;
    for j in 0..m {
        let sd_y = sd(yc, m, j);
        if sd_y <= T::zero() {
            continue;
        }
        used += 1;
        for (i, &c) in model.coefficients(j).iter().enumerate() {
            acc[i] = acc[i] + (c * sd_x[i] / sd_y).abs();
        }
    }
    let total = compensated_sum(acc.iter().copied());
    if used == 0 || total <= T::zero() {
        return Err(PredictorError::InvalidSpec("every target is constant; importance is undefined".into()));
    }
    let weights = acc.into_iter().map(|a| a / total).collect();
    AttributionVector::new(model.input_ids.clone(), weights, 0)
        .map_err(|e| PredictorError::InvalidSpec(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictors::train_linear;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    // Twenty inputs; the last one drives nothing.
    fn design(n: usize, seed: u64, noise: f64) -> Design<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let p = 20;
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let row: Vec<f64> = (0..p).map(|_| f64::from(rng.random_range(1..=5))).collect();
            let a: f64 = (0..19).map(|i| (0.2 + 0.05 * i as f64) * row[i]).sum();
            let b: f64 = (0..19).map(|i| if i % 2 == 0 { 0.4 } else { -0.3 } * row[i]).sum();
            y.push(1.0 + a + noise * normal.sample(&mut rng));
            y.push(2.0 + b + noise * normal.sample(&mut rng));
            x.extend(row);
        }
        Design::new(
            (0..p).map(|i| format!("x{i}")).collect(),
            vec!["a".into(), "b".into()],
            (0..n).map(|i| format!("p{i}")).collect(),
            x,
            y,
        )
    }

    #[test]
    fn noiseless_matches_ols() {
        let d = design(200, 7, 0.0);
        let (br, imp) = train_bayesian_ridge(&d, &BayesianRidgeConfig::default()).unwrap();
        let ols = train_linear(&d).unwrap();
        for r in 0..d.n_rows() {
            let a = br.predict_row(d.x_row(r));
            let b = ols.predict_row(d.x_row(r));
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-4, "{u} vs {v}");
            }
        }
        let s: f64 = imp.weights.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(imp.weights.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn irrelevant_inputs_get_small_importance() {
        let d = design(3000, 11, 1.0);
        let (model, imp) = train_bayesian_ridge(&d, &BayesianRidgeConfig::default()).unwrap();
        assert!(model.converged);
        let mut order: Vec<usize> = (0..20).collect();
        order.sort_by(|&a, &b| imp.weights[a].partial_cmp(&imp.weights[b]).unwrap());
        assert!(order[..5].contains(&19), "{:?}", imp.weights);
    }

    #[test]
    fn shrinks_toward_zero_with_heavy_noise() {
        let d = design(40, 5, 200.0);
        let (br, _) = train_bayesian_ridge(&d, &BayesianRidgeConfig::default()).unwrap();
        let ols = train_linear(&d).unwrap();
        let norm = |c: &[f64]| c.iter().map(|v| v * v).sum::<f64>();
        assert!(norm(br.coefficients(0)) < norm(ols.coefficients(0)));
    }
}
