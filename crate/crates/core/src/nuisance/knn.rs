//! k-nearest-neighbour regression on standardized covariates.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::registry::{param_f64, param_usize, BinaryLearner, CellData, Hyperparameters, OutcomeLearner};
use super::{OutcomeModel, Predictive, ProbabilityModel};
use crate::data::OutcomeKind;
use crate::error::{Error, Result};

/// `k` neighbours (default 25) under Euclidean distance after scaling each
/// column to unit SD. Ordinal predictions add `smoothing` (default 0.5)
/// pseudo-counts per category.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnLearner {
    pub k: usize,
    pub smoothing: f64,
}

impl Default for KnnLearner {
    fn default() -> Self {
        Self { k: 25, smoothing: 0.5 }
    }
}

impl KnnLearner {
    pub fn from_params(h: &Hyperparameters) -> Result<Self> {
        let d = Self::default();
        let k = param_usize(h, "k", d.k)?;
        let smoothing = param_f64(h, "smoothing", d.smoothing)?;
        if k == 0 || !(smoothing >= 0.0) {
            return Err(Error::LearnerConfig {
                kind: "knn".into(),
                message: format!("need k >= 1 and smoothing >= 0 (k={k}, smoothing={smoothing})"),
            });
        }
        Ok(Self { k, smoothing })
    }
}

#[derive(Debug, Clone)]
struct Neighbours {
    k: usize,
    center: Vec<f64>,
    scale: Vec<f64>,
    // standardized training rows, row-major
    rows: Vec<f64>,
    p: usize,
}

impl Neighbours {
    fn new(x: &DMatrix<f64>, k: usize) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 {
            return Err(Error::TooFewRows { needed: 1, found: 0 });
        }
        let mut center = vec![0.0; p];
        let mut scale = vec![1.0; p];
        for j in 0..p {
            let col = x.column(j);
            let m = col.mean();
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
            center[j] = m;
            if var > 1e-24 {
                scale[j] = var.sqrt();
            }
        }
        let mut rows = Vec::with_capacity(n * p);
        for i in 0..n {
            for j in 0..p {
                rows.push((x[(i, j)] - center[j]) / scale[j]);
            }
        }
        Ok(Self {
            k: k.min(n),
            center,
            scale,
            rows,
            p,
        })
    }

    /// Indices of the `k` nearest training rows; ties broken by index.
    /// `exclude` drops one training row (leave-one-out).
    fn query(&self, x: &[f64], exclude: Option<usize>) -> Vec<usize> {
        let q: Vec<f64> = (0..self.p).map(|j| (x[j] - self.center[j]) / self.scale[j]).collect();
        let mut dist: Vec<(f64, usize)> = self
            .rows
            .chunks_exact(self.p)
            .enumerate()
            .filter(|(i, _)| Some(*i) != exclude)
            .map(|(i, r)| (r.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let k = self.k.min(dist.len());
        if k == 0 {
            return Vec::new();
        }
        dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        dist.truncate(k);
        dist.into_iter().map(|(_, i)| i).collect()
    }
}

#[derive(Debug, Clone)]
struct KnnProbability {
    nb: Neighbours,
    y: Vec<f64>,
    // used when there are no covariates
    overall: f64,
}

impl ProbabilityModel for KnnProbability {
    fn predict(&self, x: &[f64]) -> f64 {
        if self.nb.p == 0 {
            return self.overall;
        }
        let idx = self.nb.query(x, None);
        idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64
    }
}

impl BinaryLearner for KnnLearner {
    fn fit(&self, x: &DMatrix<f64>, y: &[f64]) -> Result<Arc<dyn ProbabilityModel>> {
        let nb = Neighbours::new(x, self.k)?;
        let overall = y.iter().sum::<f64>() / y.len() as f64;
        Ok(Arc::new(KnnProbability {
            nb,
            y: y.to_vec(),
            overall,
        }))
    }
}

#[derive(Debug, Clone)]
struct KnnOutcome {
    nb: Neighbours,
    y: Vec<f64>,
    kind: OutcomeKind,
    sigma: f64,
    smoothing: f64,
}

impl KnnOutcome {
    fn neighbours(&self, x: &[f64], exclude: Option<usize>) -> Vec<usize> {
        if self.nb.p == 0 {
            (0..self.y.len()).filter(|&i| Some(i) != exclude).collect()
        } else {
            self.nb.query(x, exclude)
        }
    }

    fn local_mean(&self, x: &[f64], exclude: Option<usize>) -> f64 {
        let idx = self.neighbours(x, exclude);
        idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len().max(1) as f64
    }
}

impl OutcomeModel for KnnOutcome {
    fn predict(&self, x: &[f64]) -> Predictive {
        match self.kind {
            OutcomeKind::Continuous => Predictive::Normal {
                mean: self.local_mean(x, None),
                sd: self.sigma,
            },
            OutcomeKind::Ordinal(q) => {
                let idx = self.neighbours(x, None);
                let mut counts = vec![self.smoothing; q];
                for &i in &idx {
                    counts[self.y[i] as usize - 1] += 1.0;
                }
                let total: f64 = counts.iter().sum();
                Predictive::Categorical(counts.into_iter().map(|c| c / total).collect())
            }
        }
    }
}

impl OutcomeLearner for KnnLearner {
    fn fit_cells(&self, cells: &[CellData], kind: OutcomeKind) -> Result<Vec<Arc<dyn OutcomeModel>>> {
        let mut models = cells
            .iter()
            .map(|c| {
                Ok(KnnOutcome {
                    nb: Neighbours::new(&c.x, self.k)?,
                    y: c.y.clone(),
                    kind,
                    sigma: 1.0,
                    smoothing: self.smoothing,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if kind == OutcomeKind::Continuous {
            // pooled leave-one-out residual SD
            let (mut ss, mut count) = (0.0, 0usize);
            for (m, c) in models.iter().zip(cells) {
                if c.y.len() < 2 {
                    continue;
                }
                for i in 0..c.y.len() {
                    let row: Vec<f64> = c.x.row(i).iter().copied().collect();
                    let r = c.y[i] - m.local_mean(&row, Some(i));
                    ss += r * r;
                    count += 1;
                }
            }
            if count == 0 || !(ss > 0.0) {
                return Err(Error::NonpositiveSigma(0.0));
            }
            let sigma = (ss / count as f64).sqrt();
            for m in &mut models {
                m.sigma = sigma;
            }
        }
        Ok(models
            .into_iter()
            .map(|m| Arc::new(m) as Arc<dyn OutcomeModel>)
            .collect())
    }
}
