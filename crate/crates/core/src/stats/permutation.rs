use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fit_line, kendall_tau, CorrelationPairVector, StatsError};
use crate::scalar::Scalar;

pub const MIN_PERMUTATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationStatistic {
    RSquared,
    KendallTau,
}

impl PermutationStatistic {
    pub fn evaluate<T: Scalar>(self, x: &[T], y: &[T]) -> Result<T, StatsError> {
        match self {
            Self::RSquared => fit_line(x, y).map(|f| f.r_squared),
            Self::KendallTau => kendall_tau(x, y),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult<T = f64> {
    pub statistic_name: PermutationStatistic,
    pub observed: T,
    pub null_samples: Vec<T>,
    pub p_value: T,
    pub seed: u64,
}

/// Permutation test of the association between `human_r` and `model_r`.
///
/// `model_r` is shuffled uniformly against the fixed `human_r`; the p-value
/// is `(1 + #{null >= observed}) / (1 + n_perm)`.
pub fn permutation_test<T: Scalar>(
    v: &CorrelationPairVector<T>,
    statistic: PermutationStatistic,
    n_perm: usize,
    seed: u64,
) -> Result<PermutationResult<T>, StatsError> {
    if n_perm < MIN_PERMUTATIONS {
        return Err(StatsError::TooFewPermutations { requested: n_perm, minimum: MIN_PERMUTATIONS });
    }
    let observed = statistic.evaluate(&v.human_r, &v.model_r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = v.model_r.clone();
    let mut null_samples = Vec::with_capacity(n_perm);
    for _ in 0..n_perm {
        shuffled.shuffle(&mut rng);
        // a shuffle can only degenerate when model_r is tied throughout, which
        // already failed for the observed statistic
        null_samples.push(statistic.evaluate(&v.human_r, &shuffled)?);
    }
    // equal statistics reached by a different summation order must still count
    let slack = T::epsilon() * T::of(64.0) * observed.abs().max(T::one());
    let extreme = null_samples.iter().filter(|&&s| s >= observed - slack).count();
    let p_value = T::of_usize(1 + extreme) / T::of_usize(1 + n_perm);
    Ok(PermutationResult { statistic_name: statistic, observed, null_samples, p_value, seed })
}
