//! Nuisance components: treatment propensity, intermediate probabilities
//! (hence principal scores) and pairwise outcome means.
//!
//! Every learner produces unit-level models. Pairwise means are composed
//! from two unit-level predictive distributions, never fit on pairs.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

mod bundle;
mod ensemble;
mod gaussian;
mod knn;
mod logistic;
mod ordinal;
mod pairwise;
mod registry;
mod scores;
mod stumps;

pub use bundle::{
    fit_nuisance_bundle, CellModels, Clipping, NuisanceBundle, NuisanceFitter, NuisanceSpec, UnitPrediction,
};
pub use ensemble::EnsembleLearner;
pub use gaussian::{fit_gaussian_outcome, GaussianFit};
pub use knn::KnnLearner;
pub use logistic::{fit_logistic, LogisticModel, LogisticOptions};
pub use ordinal::{fit_ordinal_outcome, ordinal_log_likelihood, OrdinalFit, OrdinalOptions};
pub use pairwise::{pair_mean, pairwise_mean_gaussian, pairwise_mean_ordinal};
pub use registry::{BinaryLearner, CellData, FeatureMap, LearnerRegistry, LearnerSpec, OutcomeLearner};
pub use scores::{predict_principal_scores, PrincipalScores};
pub use stumps::BoostedStumps;

/// A fitted model of `P(target = 1 | x)`.
pub trait ProbabilityModel: Send + Sync + fmt::Debug {
    fn predict(&self, x: &[f64]) -> f64;
}

/// Predictive distribution of a unit's outcome within one observed cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictive {
    Normal {
        mean: f64,
        sd: f64,
    },
    /// Probabilities of categories `1..=Q`.
    Categorical(Vec<f64>),
}

impl Predictive {
    pub fn mean(&self) -> f64 {
        match self {
            Predictive::Normal { mean, .. } => *mean,
            Predictive::Categorical(p) => p.iter().enumerate().map(|(q, w)| (q + 1) as f64 * w).sum(),
        }
    }
}

/// A fitted unit-level outcome model for one observed `(z, d)` cell.
pub trait OutcomeModel: Send + Sync + fmt::Debug {
    fn predict(&self, x: &[f64]) -> Predictive;
}

/// Probability model backed by a closure, for injecting known functions.
#[derive(Clone)]
pub struct FnProbability(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>);

impl FnProbability {
    pub fn new(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn constant(p: f64) -> Self {
        Self::new(move |_| p)
    }
}

impl fmt::Debug for FnProbability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnProbability")
    }
}

impl ProbabilityModel for FnProbability {
    fn predict(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
}

/// Outcome model backed by a closure.
#[derive(Clone)]
pub struct FnOutcome(Arc<dyn Fn(&[f64]) -> Predictive + Send + Sync>);

impl FnOutcome {
    pub fn new(f: impl Fn(&[f64]) -> Predictive + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }
}

impl fmt::Debug for FnOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnOutcome")
    }
}

impl OutcomeModel for FnOutcome {
    fn predict(&self, x: &[f64]) -> Predictive {
        (self.0)(x)
    }
}

pub(crate) fn rows_to_matrix(rows: &[&[f64]]) -> DMatrix<f64> {
    let p = rows.first().map_or(0, |r| r.len());
    DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j])
}
