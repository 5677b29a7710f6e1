//! Gradient boosting with depth-one regression trees.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::registry::{param_f64, param_usize, BinaryLearner, CellData, Hyperparameters, OutcomeLearner};
use super::{OutcomeModel, Predictive, ProbabilityModel};
use crate::data::OutcomeKind;
use crate::error::{Error, Result};
use crate::stats::{expit, logit};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostedStumps {
    pub rounds: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
}

impl Default for BoostedStumps {
    fn default() -> Self {
        Self {
            rounds: 100,
            learning_rate: 0.1,
            min_leaf: 10,
        }
    }
}

impl BoostedStumps {
    pub fn from_params(h: &Hyperparameters) -> Result<Self> {
        let d = Self::default();
        let s = Self {
            rounds: param_usize(h, "rounds", d.rounds)?,
            learning_rate: param_f64(h, "learning_rate", d.learning_rate)?,
            min_leaf: param_usize(h, "min_leaf", d.min_leaf)?,
        };
        if !(s.learning_rate > 0.0 && s.learning_rate <= 1.0) || s.min_leaf == 0 {
            return Err(Error::LearnerConfig {
                kind: "boosted-stumps".into(),
                message: "learning_rate must be in (0, 1] and min_leaf >= 1".into(),
            });
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy)]
struct Stump {
    feature: usize,
    threshold: f64,
    left: f64,
    right: f64,
}

#[derive(Debug, Clone)]
struct Ensemble {
    base: f64,
    stumps: Vec<Stump>,
}

impl Ensemble {
    fn score(&self, x: &[f64]) -> f64 {
        self.base
            + self
                .stumps
                .iter()
                .map(|s| if x[s.feature] <= s.threshold { s.left } else { s.right })
                .sum::<f64>()
    }
}

/// Loss whose negative gradient and Newton weight drive each round.
#[derive(Clone, Copy)]
enum Loss {
    Squared,
    Logistic,
}

impl BoostedStumps {
    fn boost(&self, x: &DMatrix<f64>, y: &[f64], loss: Loss) -> Ensemble {
        let (n, p) = x.shape();
        let ybar = y.iter().sum::<f64>() / n as f64;
        let base = match loss {
            Loss::Squared => ybar,
            Loss::Logistic => logit(ybar.clamp(1e-6, 1.0 - 1e-6)),
        };
        let order: Vec<Vec<usize>> = (0..p)
            .map(|j| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| x[(a, j)].total_cmp(&x[(b, j)]));
                idx
            })
            .collect();
        let mut f = vec![base; n];
        let mut stumps = Vec::with_capacity(self.rounds);
        let mut g = vec![0.0; n];
        let mut w = vec![0.0; n];
        for _ in 0..self.rounds {
            for i in 0..n {
                match loss {
                    Loss::Squared => {
                        g[i] = y[i] - f[i];
                        w[i] = 1.0;
                    }
                    Loss::Logistic => {
                        let pr = expit(f[i]);
                        g[i] = y[i] - pr;
                        w[i] = (pr * (1.0 - pr)).max(1e-6);
                    }
                }
            }
            let (gt, wt): (f64, f64) = (g.iter().sum(), w.iter().sum());
            let mut best: Option<(f64, Stump)> = None;
            for j in 0..p {
                let (mut gl, mut wl) = (0.0, 0.0);
                for (rank, &i) in order[j].iter().enumerate().take(n.saturating_sub(1)) {
                    gl += g[i];
                    wl += w[i];
                    let next = order[j][rank + 1];
                    let (left_n, right_n) = (rank + 1, n - rank - 1);
                    if x[(i, j)] == x[(next, j)] || left_n < self.min_leaf || right_n < self.min_leaf {
                        continue;
                    }
                    let (gr, wr) = (gt - gl, wt - wl);
                    let gain = gl * gl / wl + gr * gr / wr;
                    if best.as_ref().map_or(true, |(b, _)| gain > *b) {
                        best = Some((
                            gain,
                            Stump {
                                feature: j,
                                threshold: 0.5 * (x[(i, j)] + x[(next, j)]),
                                left: gl / wl,
                                right: gr / wr,
                            },
                        ));
                    }
                }
            }
            let Some((_, mut s)) = best else { break };
            s.left *= self.learning_rate;
            s.right *= self.learning_rate;
            for i in 0..n {
                f[i] += if x[(i, s.feature)] <= s.threshold {
                    s.left
                } else {
                    s.right
                };
            }
            stumps.push(s);
        }
        Ensemble { base, stumps }
    }
}

#[derive(Debug, Clone)]
struct StumpProbability(Ensemble);

impl ProbabilityModel for StumpProbability {
    fn predict(&self, x: &[f64]) -> f64 {
        expit(self.0.score(x))
    }
}

impl BinaryLearner for BoostedStumps {
    fn fit(&self, x: &DMatrix<f64>, y: &[f64]) -> Result<Arc<dyn ProbabilityModel>> {
        if y.is_empty() {
            return Err(Error::TooFewRows { needed: 1, found: 0 });
        }
        Ok(Arc::new(StumpProbability(self.boost(x, y, Loss::Logistic))))
    }
}

#[derive(Debug, Clone)]
enum StumpOutcome {
    Normal { mean: Ensemble, sd: f64 },
    // one logistic booster per cumulative event Y <= q
    Ordinal(Vec<Ensemble>),
}

impl OutcomeModel for StumpOutcome {
    fn predict(&self, x: &[f64]) -> Predictive {
        match self {
            StumpOutcome::Normal { mean, sd } => Predictive::Normal {
                mean: mean.score(x),
                sd: *sd,
            },
            StumpOutcome::Ordinal(cum) => {
                let mut probs = Vec::with_capacity(cum.len() + 1);
                let mut prev = 0.0;
                for e in cum {
                    // cumulative maximum keeps the category probabilities nonnegative
                    let c = expit(e.score(x)).max(prev);
                    probs.push(c - prev);
                    prev = c;
                }
                probs.push(1.0 - prev);
                Predictive::Categorical(probs)
            }
        }
    }
}

impl OutcomeLearner for BoostedStumps {
    fn fit_cells(&self, cells: &[CellData], kind: OutcomeKind) -> Result<Vec<Arc<dyn OutcomeModel>>> {
        if let Some(c) = cells.iter().find(|c| c.y.is_empty()) {
            return Err(Error::EmptyCell { z: c.z, d: c.d });
        }
        match kind {
            OutcomeKind::Continuous => {
                let fits: Vec<Ensemble> = cells.iter().map(|c| self.boost(&c.x, &c.y, Loss::Squared)).collect();
                let (mut ss, mut count) = (0.0, 0usize);
                for (e, c) in fits.iter().zip(cells) {
                    for (i, y) in c.y.iter().enumerate() {
                        let row: Vec<f64> = c.x.row(i).iter().copied().collect();
                        ss += (y - e.score(&row)).powi(2);
                        count += 1;
                    }
                }
                let sd = (ss / count as f64).sqrt();
                if !(sd > 0.0) {
                    return Err(Error::NonpositiveSigma(sd));
                }
                Ok(fits
                    .into_iter()
                    .map(|mean| Arc::new(StumpOutcome::Normal { mean, sd }) as Arc<dyn OutcomeModel>)
                    .collect())
            }
            OutcomeKind::Ordinal(q) => cells
                .iter()
                .map(|c| {
                    let cum = (1..q)
                        .map(|level| {
                            let ind: Vec<f64> = c.y.iter().map(|&y| f64::from(u8::from(y <= level as f64))).collect();
                            self.boost(&c.x, &ind, Loss::Logistic)
                        })
                        .collect();
                    Ok(Arc::new(StumpOutcome::Ordinal(cum)) as Arc<dyn OutcomeModel>)
                })
                .collect(),
        }
    }
}
