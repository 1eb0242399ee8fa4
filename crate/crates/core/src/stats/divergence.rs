use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::scalar::{compensated_sum, Scalar};

/// Additive smoothing applied before computing KL divergence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlConfig {
    pub epsilon: f64,
}

impl Default for KlConfig {
    fn default() -> Self {
        Self { epsilon: 1e-6 }
    }
}

impl KlConfig {
    pub fn new(epsilon: f64) -> Result<Self, StatsError> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(StatsError::InvalidEpsilon(epsilon));
        }
        Ok(Self { epsilon })
    }
}

fn check_distribution<T: Scalar>(p: &[T]) -> Result<(), StatsError> {
    if p.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    if p.iter().any(|&v| v < T::zero()) {
        return Err(StatsError::NegativeProbability);
    }
    let sum = compensated_sum(p.iter().copied());
    let tol = T::of(1e-9).max(T::epsilon() * T::of_usize(4 * p.len().max(1)));
    if (sum - T::one()).abs() > tol {
        return Err(StatsError::NotNormalized { sum: sum.to_f64_lossy() });
    }
    Ok(())
}

/// `(p + eps) / (1 + n eps)`, elementwise.
pub fn smooth<T: Scalar>(p: &[T], epsilon: f64) -> Vec<T> {
    let eps = T::of(epsilon);
    let total = compensated_sum(p.iter().copied()) + eps * T::of_usize(p.len());
    p.iter().map(|&v| (v + eps) / total).collect()
}

/// Smoothed Kullback-Leibler divergence `D(p || q)` in nats.
pub fn kl_divergence<T: Scalar>(p: &[T], q: &[T], cfg: &KlConfig) -> Result<T, StatsError> {
    if p.len() != q.len() {
        return Err(StatsError::LengthMismatch { left: p.len(), right: q.len() });
    }
    if p.is_empty() {
        return Err(StatsError::TooFewPoints { needed: 1, got: 0 });
    }
    check_distribution(p)?;
    check_distribution(q)?;
    let ps = smooth(p, cfg.epsilon);
    let qs = smooth(q, cfg.epsilon);
    let d = compensated_sum(ps.iter().zip(&qs).map(|(&a, &b)| a * (a / b).ln()));
    Ok(d.max(T::zero()))
}
