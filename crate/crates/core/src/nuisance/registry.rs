//! Learner specifications and the registry that resolves them.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ensemble::EnsembleLearner;
use super::gaussian::fit_gaussian_outcome;
use super::knn::KnnLearner;
use super::logistic::{LogisticModel, LogisticOptions};
use super::ordinal::{fit_ordinal_outcome, OrdinalFit, OrdinalOptions};
use super::stumps::BoostedStumps;
use super::{OutcomeModel, Predictive, ProbabilityModel};
use crate::data::OutcomeKind;
use crate::error::{Error, Result};
use crate::simulation::transform_covariates;

/// Covariates a learner sees: the raw vector or the nonlinear transform used
/// to induce misspecification in simulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMap {
    #[default]
    Raw,
    Transformed,
}

impl FeatureMap {
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            FeatureMap::Raw => Ok(x.to_vec()),
            FeatureMap::Transformed => {
                let arr: [f64; 4] = x
                    .try_into()
                    .map_err(|_| Error::Config(format!("transformed features need 4 covariates, got {}", x.len())))?;
                Ok(transform_covariates(arr)?.to_vec())
            }
        }
    }
}

pub type Hyperparameters = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub kind: String,
    #[serde(default)]
    pub hyperparameters: Hyperparameters,
    #[serde(default)]
    pub features: FeatureMap,
}

impl LearnerSpec {
    pub fn new(kind: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            hyperparameters: Hyperparameters::new(),
            features: FeatureMap::Raw,
        }
    }

    pub fn with_features(mut self, features: FeatureMap) -> Self {
        self.features = features;
        self
    }

    pub fn with_param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.hyperparameters.insert(key.to_string(), value.into());
        self
    }
}

pub(crate) fn param_usize(h: &Hyperparameters, key: &str, default: usize) -> Result<usize> {
    match h.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_u64()
            .map(|v| v as usize)
            .ok_or_else(|| Error::Config(format!("hyperparameter `{key}` must be a non-negative integer"))),
    }
}

pub(crate) fn param_f64(h: &Hyperparameters, key: &str, default: f64) -> Result<f64> {
    match h.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| Error::Config(format!("hyperparameter `{key}` must be a number"))),
    }
}

/// Training rows of one observed `(z, d)` cell.
#[derive(Debug, Clone)]
pub struct CellData {
    pub z: u8,
    pub d: u8,
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
}

/// Fits `P(y = 1 | x)` from 0/1 responses.
pub trait BinaryLearner: Send + Sync {
    fn fit(&self, x: &DMatrix<f64>, y: &[f64]) -> Result<Arc<dyn ProbabilityModel>>;
}

/// Fits one unit-level outcome model per cell. Cells are fitted together so
/// that learners may pool a dispersion estimate across them.
pub trait OutcomeLearner: Send + Sync {
    fn fit_cells(&self, cells: &[CellData], kind: OutcomeKind) -> Result<Vec<Arc<dyn OutcomeModel>>>;
}

type BinaryFactory = Arc<dyn Fn(&Hyperparameters, &LearnerRegistry) -> Result<Box<dyn BinaryLearner>> + Send + Sync>;
type OutcomeFactory = Arc<dyn Fn(&Hyperparameters, &LearnerRegistry) -> Result<Box<dyn OutcomeLearner>> + Send + Sync>;

/// Maps learner kinds to factories. The default registry knows
/// `parametric-logistic`, `parametric-gaussian`, `parametric-ordinal`,
/// `parametric` (whichever parametric model fits the target), `knn`,
/// `boosted-stumps` and `ensemble`.
#[derive(Clone)]
pub struct LearnerRegistry {
    binary: HashMap<String, BinaryFactory>,
    outcome: HashMap<String, OutcomeFactory>,
}

impl fmt::Debug for LearnerRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut b: Vec<_> = self.binary.keys().collect();
        let mut o: Vec<_> = self.outcome.keys().collect();
        b.sort();
        o.sort();
        f.debug_struct("LearnerRegistry")
            .field("binary", &b)
            .field("outcome", &o)
            .finish()
    }
}

impl Default for LearnerRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        for name in ["parametric-logistic", "parametric"] {
            r.register_binary(name, |h, _| Ok(Box::new(ParametricLogistic::from_params(h)?)));
        }
        r.register_outcome("parametric-gaussian", |_, _| Ok(Box::new(ParametricOutcome::Gaussian)));
        r.register_outcome("parametric-ordinal", |_, _| Ok(Box::new(ParametricOutcome::Ordinal)));
        r.register_outcome("parametric", |_, _| Ok(Box::new(ParametricOutcome::Auto)));
        r.register_binary("knn", |h, _| Ok(Box::new(KnnLearner::from_params(h)?)));
        r.register_outcome("knn", |h, _| Ok(Box::new(KnnLearner::from_params(h)?)));
        r.register_binary("boosted-stumps", |h, _| Ok(Box::new(BoostedStumps::from_params(h)?)));
        r.register_outcome("boosted-stumps", |h, _| Ok(Box::new(BoostedStumps::from_params(h)?)));
        r.register_binary("ensemble", |h, reg| {
            Ok(Box::new(EnsembleLearner::from_params(h, reg, false)?))
        });
        r.register_outcome("ensemble", |h, reg| {
            Ok(Box::new(EnsembleLearner::from_params(h, reg, true)?))
        });
        r
    }
}

impl LearnerRegistry {
    pub fn empty() -> Self {
        Self {
            binary: HashMap::new(),
            outcome: HashMap::new(),
        }
    }

    pub fn register_binary<F>(&mut self, kind: &str, factory: F)
    where
        F: Fn(&Hyperparameters, &LearnerRegistry) -> Result<Box<dyn BinaryLearner>> + Send + Sync + 'static,
    {
        self.binary.insert(kind.to_string(), Arc::new(factory));
    }

    pub fn register_outcome<F>(&mut self, kind: &str, factory: F)
    where
        F: Fn(&Hyperparameters, &LearnerRegistry) -> Result<Box<dyn OutcomeLearner>> + Send + Sync + 'static,
    {
        self.outcome.insert(kind.to_string(), Arc::new(factory));
    }

    pub fn binary(&self, spec: &LearnerSpec) -> Result<Box<dyn BinaryLearner>> {
        let f = self
            .binary
            .get(&spec.kind)
            .ok_or_else(|| Error::UnknownLearner(spec.kind.clone()))?;
        f(&spec.hyperparameters, self)
    }

    pub fn outcome(&self, spec: &LearnerSpec) -> Result<Box<dyn OutcomeLearner>> {
        let f = self
            .outcome
            .get(&spec.kind)
            .ok_or_else(|| Error::UnknownLearner(spec.kind.clone()))?;
        f(&spec.hyperparameters, self)
    }
}

struct ParametricLogistic {
    opts: LogisticOptions,
}

impl ParametricLogistic {
    fn from_params(h: &Hyperparameters) -> Result<Self> {
        let d = LogisticOptions::default();
        Ok(Self {
            opts: LogisticOptions {
                max_iter: param_usize(h, "max_iter", d.max_iter)?,
                tol: param_f64(h, "tol", d.tol)?,
                coef_cap: param_f64(h, "coef_cap", d.coef_cap)?,
                max_eta: param_f64(h, "max_eta", d.max_eta)?,
            },
        })
    }
}

impl BinaryLearner for ParametricLogistic {
    fn fit(&self, x: &DMatrix<f64>, y: &[f64]) -> Result<Arc<dyn ProbabilityModel>> {
        Ok(Arc::new(LogisticModel::fit(x, y, &self.opts)?))
    }
}

#[derive(Debug, Clone)]
struct LinearNormal {
    coef: Vec<f64>,
    sigma: f64,
}

impl OutcomeModel for LinearNormal {
    fn predict(&self, x: &[f64]) -> Predictive {
        let mean = self.coef[0] + self.coef[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
        Predictive::Normal { mean, sd: self.sigma }
    }
}

#[derive(Debug, Clone)]
struct OrdinalModel(OrdinalFit);

impl OutcomeModel for OrdinalModel {
    fn predict(&self, x: &[f64]) -> Predictive {
        Predictive::Categorical(self.0.probabilities(x))
    }
}

enum ParametricOutcome {
    Gaussian,
    Ordinal,
    Auto,
}

impl OutcomeLearner for ParametricOutcome {
    fn fit_cells(&self, cells: &[CellData], kind: OutcomeKind) -> Result<Vec<Arc<dyn OutcomeModel>>> {
        let ordinal_levels = match (self, kind) {
            (ParametricOutcome::Gaussian, _) | (ParametricOutcome::Auto, OutcomeKind::Continuous) => None,
            (_, OutcomeKind::Ordinal(q)) => Some(q),
            (ParametricOutcome::Ordinal, OutcomeKind::Continuous) => {
                return Err(Error::LearnerConfig {
                    kind: "parametric-ordinal".into(),
                    message: "outcome is continuous".into(),
                })
            }
        };
        match ordinal_levels {
            Some(q) => cells
                .iter()
                .map(|c| {
                    let fit = fit_ordinal_outcome(&c.x, &c.y, q, &OrdinalOptions::default())?;
                    Ok(Arc::new(OrdinalModel(fit)) as Arc<dyn OutcomeModel>)
                })
                .collect(),
            None => {
                let fits = cells
                    .iter()
                    .map(|c| fit_gaussian_outcome(&c.x, &c.y))
                    .collect::<Result<Vec<_>>>()?;
                // homoscedastic: one residual SD pooled over the cells
                let rss: f64 = fits.iter().map(|f| f.rss).sum();
                let df: usize = fits.iter().map(|f| f.df).sum();
                let sigma = (rss / df as f64).sqrt();
                Ok(fits
                    .into_iter()
                    .map(|f| Arc::new(LinearNormal { coef: f.coef, sigma }) as Arc<dyn OutcomeModel>)
                    .collect())
            }
        }
    }
}
