//! Structural comparison of predicted and human questionnaire data.

pub mod attribution;
pub mod data;
pub mod linalg;
pub mod predictors;
pub mod reference;
pub mod scalar;
pub mod stats;
pub mod structural;
pub mod synthgen;

pub use scalar::Scalar;

/// Default working precision.
pub type Real = f64;

pub type Fit = stats::AmplificationFit<Real>;
pub type Fit32 = stats::AmplificationFit<f32>;
pub type Predictions = data::PredictionMatrix<Real>;
pub type Predictions32 = data::PredictionMatrix<f32>;
pub type Scores = data::SubscaleScores<Real>;
pub type Attribution = attribution::AttributionVector<Real>;
pub type Report = structural::StructuralReport<Real>;
pub type Report32 = structural::StructuralReport<f32>;
