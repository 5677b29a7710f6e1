//! Discrete super learner: picks the candidate with the smallest V-fold
//! cross-validated loss and refits it on all rows.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::registry::{
    param_usize, BinaryLearner, CellData, Hyperparameters, LearnerRegistry, LearnerSpec, OutcomeLearner,
};
use super::{OutcomeModel, Predictive, ProbabilityModel};
use crate::data::OutcomeKind;
use crate::error::{Error, Result};

const DEFAULT_CANDIDATES: [&str; 3] = ["parametric", "knn", "boosted-stumps"];

pub struct EnsembleLearner {
    folds: usize,
    binary: Vec<Box<dyn BinaryLearner>>,
    outcome: Vec<Box<dyn OutcomeLearner>>,
}

impl std::fmt::Debug for EnsembleLearner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EnsembleLearner")
            .field("folds", &self.folds)
            .field("candidates", &self.binary.len().max(self.outcome.len()))
            .finish()
    }
}

impl EnsembleLearner {
    /// Hyperparameters: `folds` (default 5) and `candidates`, a list of
    /// learner specs (default parametric, knn, boosted-stumps).
    pub fn from_params(h: &Hyperparameters, registry: &LearnerRegistry, outcome: bool) -> Result<Self> {
        let folds = param_usize(h, "folds", 5)?;
        if folds < 2 {
            return Err(Error::LearnerConfig {
                kind: "ensemble".into(),
                message: format!("need at least 2 folds, got {folds}"),
            });
        }
        let specs: Vec<LearnerSpec> = match h.get("candidates") {
            None => DEFAULT_CANDIDATES.iter().map(|k| LearnerSpec::new(*k)).collect(),
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| Error::LearnerConfig {
                kind: "ensemble".into(),
                message: format!("bad candidates: {e}"),
            })?,
        };
        if specs.is_empty() || specs.iter().any(|s| s.kind == "ensemble") {
            return Err(Error::LearnerConfig {
                kind: "ensemble".into(),
                message: "candidates must be a nonempty list of non-ensemble learners".into(),
            });
        }
        let mut me = Self {
            folds,
            binary: Vec::new(),
            outcome: Vec::new(),
        };
        for s in &specs {
            if outcome {
                me.outcome.push(registry.outcome(s)?);
            } else {
                me.binary.push(registry.binary(s)?);
            }
        }
        Ok(me)
    }

    fn split(&self, n: usize, v: usize) -> (Vec<usize>, Vec<usize>) {
        (0..n).partition(|i| i % self.folds != v)
    }
}

fn take_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    x.select_rows(rows)
}

fn row(x: &DMatrix<f64>, i: usize) -> Vec<f64> {
    x.row(i).iter().copied().collect()
}

fn binary_loss(p: f64, y: f64) -> f64 {
    let p = p.clamp(1e-6, 1.0 - 1e-6);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

fn predictive_loss(pred: &Predictive, y: f64) -> f64 {
    match pred {
        Predictive::Normal { mean, sd } => {
            let sd = sd.max(1e-8);
            let r = (y - mean) / sd;
            0.5 * r * r + sd.ln()
        }
        Predictive::Categorical(p) => -p.get(y as usize - 1).copied().unwrap_or(0.0).max(1e-12).ln(),
    }
}

/// Index of the smallest finite loss, first on ties.
fn argmin(losses: &[f64]) -> Option<usize> {
    losses
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
}

impl EnsembleLearner {
    fn binary_cv_loss(&self, cand: &dyn BinaryLearner, x: &DMatrix<f64>, y: &[f64]) -> f64 {
        let mut total = 0.0;
        for v in 0..self.folds {
            let (train, test) = self.split(y.len(), v);
            if test.is_empty() {
                continue;
            }
            let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let Ok(m) = cand.fit(&take_rows(x, &train), &ty) else {
                return f64::INFINITY;
            };
            total += test
                .iter()
                .map(|&i| binary_loss(m.predict(&row(x, i)), y[i]))
                .sum::<f64>();
        }
        total
    }

    fn outcome_cv_loss(&self, cand: &dyn OutcomeLearner, cells: &[CellData], kind: OutcomeKind) -> f64 {
        let mut total = 0.0;
        for v in 0..self.folds {
            let mut train_cells = Vec::with_capacity(cells.len());
            let mut tests = Vec::with_capacity(cells.len());
            for c in cells {
                let (train, test) = self.split(c.y.len(), v);
                train_cells.push(CellData {
                    z: c.z,
                    d: c.d,
                    x: take_rows(&c.x, &train),
                    y: train.iter().map(|&i| c.y[i]).collect(),
                });
                tests.push(test);
            }
            let Ok(models) = cand.fit_cells(&train_cells, kind) else {
                return f64::INFINITY;
            };
            for ((m, c), test) in models.iter().zip(cells).zip(&tests) {
                total += test
                    .iter()
                    .map(|&i| predictive_loss(&m.predict(&row(&c.x, i)), c.y[i]))
                    .sum::<f64>();
            }
        }
        total
    }
}

impl BinaryLearner for EnsembleLearner {
    fn fit(&self, x: &DMatrix<f64>, y: &[f64]) -> Result<Arc<dyn ProbabilityModel>> {
        let losses: Vec<f64> = self
            .binary
            .iter()
            .map(|c| self.binary_cv_loss(c.as_ref(), x, y))
            .collect();
        match argmin(&losses) {
            Some(best) => self.binary[best].fit(x, y),
            None => self.binary[0].fit(x, y),
        }
    }
}

impl OutcomeLearner for EnsembleLearner {
    fn fit_cells(&self, cells: &[CellData], kind: OutcomeKind) -> Result<Vec<Arc<dyn OutcomeModel>>> {
        let losses: Vec<f64> = self
            .outcome
            .iter()
            .map(|c| self.outcome_cv_loss(c.as_ref(), cells, kind))
            .collect();
        match argmin(&losses) {
            Some(best) => self.outcome[best].fit_cells(cells, kind),
            None => self.outcome[0].fit_cells(cells, kind),
        }
    }
}
