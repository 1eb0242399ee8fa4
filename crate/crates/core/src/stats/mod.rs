//! Deterministic statistical kernels.

mod correlation;
mod divergence;
mod kendall;
mod permutation;
mod regression;

pub use correlation::{correlation_matrix, pearson, CorrelationMatrix};
pub use divergence::{kl_divergence, smooth, KlConfig};
pub use kendall::kendall_tau;
pub use permutation::{permutation_test, PermutationResult, PermutationStatistic, MIN_PERMUTATIONS};
pub use regression::{fit_amplification, fit_line, AmplificationFit, CorrelationPairVector, SlopeModel};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum StatsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("zero variance")]
    ZeroVariance,
    #[error("predictor has no spread")]
    DegenerateX,
    #[error("every pair is tied")]
    AllTied,
    #[error("non-finite value")]
    NonFinite,
    #[error("probabilities sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("negative probability")]
    NegativeProbability,
    #[error("smoothing epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("only {shared} shared participants")]
    NoSharedParticipants { shared: usize },
    #[error("{requested} permutations requested, minimum is {minimum}")]
    TooFewPermutations { requested: usize, minimum: usize },
    #[error("self pair `{0}`")]
    SelfPair(String),
}
