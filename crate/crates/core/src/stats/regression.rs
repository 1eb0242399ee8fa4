use serde::{Deserialize, Serialize};

use super::correlation::{check_pair, moments};
use super::StatsError;
use crate::scalar::{compensated_sum, Scalar};

/// Aligned human and model correlations over labelled sub-factor pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPairVector<T = f64> {
    pub labels: Vec<(String, String)>,
    pub human_r: Vec<T>,
    pub model_r: Vec<T>,
}

impl<T: Scalar> CorrelationPairVector<T> {
    pub fn new(labels: Vec<(String, String)>, human_r: Vec<T>, model_r: Vec<T>) -> Result<Self, StatsError> {
        if labels.len() != human_r.len() || human_r.len() != model_r.len() {
            return Err(StatsError::LengthMismatch { left: human_r.len(), right: model_r.len() });
        }
        if let Some((a, _)) = labels.iter().find(|(a, b)| a == b) {
            return Err(StatsError::SelfPair(a.clone()));
        }
        Ok(Self { labels, human_r, model_r })
    }

    /// Unlabelled vectors; labels are the positions.
    pub fn from_values(human_r: Vec<T>, model_r: Vec<T>) -> Result<Self, StatsError> {
        let labels = (0..human_r.len()).map(|i| (format!("x{i}"), format!("y{i}"))).collect();
        Self::new(labels, human_r, model_r)
    }

    pub fn len(&self) -> usize {
        self.human_r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.human_r.is_empty()
    }
}

/// Which regression supplies the reported amplification coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeModel {
    #[default]
    WithIntercept,
    ThroughOrigin,
}

/// OLS of model correlations on human correlations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplificationFit<T = f64> {
    /// Slope of the intercept model: the amplification coefficient.
    pub k: T,
    pub intercept: T,
    pub r_squared: T,
    pub n_points: usize,
    /// Slope of the regression constrained through the origin.
    pub k_through_origin: T,
}

impl<T: Scalar> AmplificationFit<T> {
    pub fn reported_k(&self, model: SlopeModel) -> T {
        match model {
            SlopeModel::WithIntercept => self.k,
            SlopeModel::ThroughOrigin => self.k_through_origin,
        }
    }
}

/// Ordinary least squares of `y` on `x` with intercept.
pub fn fit_line<T: Scalar>(x: &[T], y: &[T]) -> Result<AmplificationFit<T>, StatsError> {
    check_pair(x, y, 3)?;
    let (mx, my, sxx, sxy, syy) = moments(x, y);
    if sxx <= T::zero() || x.iter().all(|&a| a == x[0]) {
        return Err(StatsError::DegenerateX);
    }
    let k = sxy / sxx;
    let intercept = my - k * mx;
    let r_squared = if syy <= T::zero() {
        // constant response is reproduced exactly by the flat line
        T::one()
    } else {
        (sxy * sxy / (sxx * syy)).max(T::zero()).min(T::one())
    };
    let sxx0 = compensated_sum(x.iter().map(|&a| a * a));
    let sxy0 = compensated_sum(x.iter().zip(y).map(|(&a, &b)| a * b));
    Ok(AmplificationFit { k, intercept, r_squared, n_points: x.len(), k_through_origin: sxy0 / sxx0 })
}

/// Amplification fit: model correlations regressed on human correlations.
pub fn fit_amplification<T: Scalar>(v: &CorrelationPairVector<T>) -> Result<AmplificationFit<T>, StatsError> {
    fit_line(&v.human_r, &v.model_r)
}
