use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::design::predict_matrix;
use super::{LinearModel, PredictorError};
use crate::data::{PredictionMatrix, ResponseMatrix};
use crate::scalar::Scalar;

/// Adds i.i.d. `N(0, sigma²)` noise to every present cell, visiting cells in
/// row-major order. `sigma = 0` returns an exact copy.
pub fn add_gaussian_noise<T: Scalar>(clean: &PredictionMatrix<T>, sigma: f64, seed: u64) -> PredictionMatrix<T> {
    if sigma == 0.0 {
        return clean.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated as finite and non-negative");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    clean.map_values(|_, _, v| v + T::of(normal.sample(&mut rng)))
}

/// Linear-model predictions with injected Gaussian noise.
pub fn predict_noisy_linear<T: Scalar>(
    model: &LinearModel<T>,
    inputs: &ResponseMatrix,
    sigma: f64,
    seed: u64,
) -> Result<PredictionMatrix<T>, PredictorError> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(PredictorError::InvalidSpec(format!("sigma must be >= 0, got {sigma}")));
    }
    let clean = predict_matrix(model, inputs, &model.target_ids)?;
    Ok(add_gaussian_noise(&clean, sigma, seed))
}
