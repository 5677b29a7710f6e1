//! Logistic regression by damped Newton-Raphson (IRLS).

use nalgebra::{DMatrix, DVector};

use super::ProbabilityModel;
use crate::error::{Error, Result};
use crate::stats::expit;

#[derive(Debug, Clone, Copy)]
pub struct LogisticOptions {
    pub max_iter: usize,
    /// Convergence threshold on the max-norm of the score.
    pub tol: f64,
    /// Coefficient norm treated as divergence.
    pub coef_cap: f64,
    /// Largest linear predictor magnitude accepted at convergence.
    pub max_eta: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-8,
            coef_cap: 100.0,
            max_eta: 25.0,
        }
    }
}

fn log_likelihood(x: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    eta.iter()
        .zip(y)
        .map(|(&e, &t)| {
            // log(1 + exp(e)) computed stably
            let softplus = if e > 0.0 {
                e + (-e).exp().ln_1p()
            } else {
                e.exp().ln_1p()
            };
            t * e - softplus
        })
        .sum()
}

/// Solves `a x = b` for symmetric positive definite `a`, rejecting
/// numerically singular systems.
pub(crate) fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let ch = a.clone().cholesky()?;
    let l = ch.l_dirty();
    let diag: Vec<f64> = (0..a.nrows()).map(|i| l[(i, i)] * l[(i, i)]).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    if diag.iter().any(|&d| !(d > 1e-12 * max)) {
        return None;
    }
    Some(ch.solve(b))
}

fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = x.shape();
    DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] })
}

/// Per-column centering and scaling used to condition Newton systems.
/// Constant columns are centered only, so they stay exactly collinear with
/// the intercept.
pub(crate) struct ColumnScale {
    center: Vec<f64>,
    scale: Vec<f64>,
}

impl ColumnScale {
    pub fn standardize(x: &DMatrix<f64>) -> (DMatrix<f64>, Self) {
        let (n, p) = x.shape();
        let mut center = vec![0.0; p];
        let mut scale = vec![1.0; p];
        for j in 0..p {
            let col = x.column(j);
            let m = col.sum() / n.max(1) as f64;
            let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n.max(1) as f64).sqrt();
            center[j] = m;
            if sd > 0.0 {
                scale[j] = sd;
            }
        }
        let z = DMatrix::from_fn(n, p, |i, j| (x[(i, j)] - center[j]) / scale[j]);
        (z, Self { center, scale })
    }

    /// Slopes on the original columns and the constant to add to every
    /// intercept or cutpoint.
    pub fn unscale(&self, slope: &[f64]) -> (Vec<f64>, f64) {
        let raw: Vec<f64> = slope.iter().zip(&self.scale).map(|(g, s)| g / s).collect();
        let shift = -raw.iter().zip(&self.center).map(|(b, m)| b * m).sum::<f64>();
        (raw, shift)
    }
}

/// Maximum-likelihood logit fit of `y` on `[1, x]`. Returns the coefficient
/// vector with the intercept first.
pub fn fit_logistic(x: &DMatrix<f64>, y: &[f64], opts: &LogisticOptions) -> Result<Vec<f64>> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::Config(format!(
            "design has {n} rows but response has {}",
            y.len()
        )));
    }
    if n < p + 1 {
        return Err(Error::TooFewRows {
            needed: p + 1,
            found: n,
        });
    }
    let (xs, cs) = ColumnScale::standardize(x);
    let gamma = fit_standardized(&with_intercept(&xs), y, opts)?;
    let (slope, shift) = cs.unscale(&gamma[1..]);
    Ok(std::iter::once(gamma[0] + shift).chain(slope).collect())
}

fn fit_standardized(xa: &DMatrix<f64>, y: &[f64], opts: &LogisticOptions) -> Result<Vec<f64>> {
    let (n, k) = xa.shape();
    let ybar = y.iter().sum::<f64>() / n as f64;
    if ybar <= 0.0 || ybar >= 1.0 {
        return Err(Error::SeparationDetected { norm: f64::INFINITY });
    }
    let mut beta = DVector::<f64>::zeros(k);
    beta[0] = (ybar / (1.0 - ybar)).ln();
    let mut ll = log_likelihood(xa, y, &beta);

    for iter in 0..=opts.max_iter {
        let eta = xa * &beta;
        let mut score = DVector::<f64>::zeros(k);
        let mut info = DMatrix::<f64>::zeros(k, k);
        for i in 0..n {
            let pi = expit(eta[i]);
            let w = pi * (1.0 - pi);
            let r = y[i] - pi;
            let row = xa.row(i);
            for a in 0..k {
                score[a] += row[a] * r;
                let wa = w * row[a];
                for b in 0..=a {
                    info[(a, b)] += wa * row[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                info[(b, a)] = info[(a, b)];
            }
        }
        let max_score = score.amax();
        let max_eta = eta.amax();
        if max_score < opts.tol {
            // extreme fitted values alone can come from high-leverage rows;
            // under separation the likelihood keeps rising along the ray
            if max_eta > opts.max_eta && log_likelihood(xa, y, &(&beta * 2.0)) >= ll - 1e-8 * ll.abs().max(1.0) {
                return Err(Error::SeparationDetected { norm: beta.norm() });
            }
            return Ok(beta.iter().copied().collect());
        }
        if iter == opts.max_iter {
            return Err(Error::NoConvergence {
                solver: "logistic",
                iterations: opts.max_iter,
                score: max_score,
            });
        }
        let step = match solve_spd(&info, &score) {
            Some(step) => step,
            None if max_eta > opts.max_eta => return Err(Error::SeparationDetected { norm: beta.norm() }),
            None => return Err(Error::SingularInformation),
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = &beta + &step * t;
            let cand_ll = log_likelihood(xa, y, &cand);
            if cand_ll.is_finite() && cand_ll >= ll - 1e-12 * ll.abs().max(1.0) {
                beta = cand;
                ll = cand_ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                solver: "logistic",
                iterations: iter,
                score: max_score,
            });
        }
        let norm = beta.norm();
        if norm > opts.coef_cap {
            return Err(Error::SeparationDetected { norm });
        }
    }
    unreachable!("loop returns on its last iteration")
}

/// A fitted logit model; `coef[0]` is the intercept.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    pub coef: Vec<f64>,
}

impl LogisticModel {
    pub fn fit(x: &DMatrix<f64>, y: &[f64], opts: &LogisticOptions) -> Result<Self> {
        fit_logistic(x, y, opts).map(|coef| Self { coef })
    }

    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        self.coef[0] + self.coef[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

impl ProbabilityModel for LogisticModel {
    fn predict(&self, x: &[f64]) -> f64 {
        expit(self.linear_predictor(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::logit;

    #[test]
    fn intercept_only_matches_closed_form() {
        let x = DMatrix::<f64>::zeros(8, 0);
        let y = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let coef = fit_logistic(&x, &y, &LogisticOptions::default()).unwrap();
        assert!((coef[0] - logit(0.25)).abs() < 1e-6);
        assert!((coef[0] + 1.098_61).abs() < 1e-5);
    }

    #[test]
    fn threshold_separation_detected() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 / 4.0).collect();
        let y: Vec<f64> = xs.iter().map(|&v| if v > 2.4 { 1.0 } else { 0.0 }).collect();
        let x = DMatrix::from_column_slice(20, 1, &xs);
        assert!(matches!(
            fit_logistic(&x, &y, &LogisticOptions::default()),
            Err(Error::SeparationDetected { .. })
        ));
    }

    #[test]
    fn high_leverage_row_is_not_separation() {
        // one far-out covariate value consistent with the bulk fit gives a
        // huge linear predictor at a finite maximum
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut xs: Vec<f64> = (0..300).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut y: Vec<f64> = xs.iter().map(|&v| f64::from(rng.random::<f64>() < expit(v))).collect();
        xs.push(60.0);
        y.push(1.0);
        let x = DMatrix::from_column_slice(301, 1, &xs);
        let coef = fit_logistic(&x, &y, &LogisticOptions::default()).unwrap();
        assert!(coef[0] + coef[1] * 60.0 > 25.0, "{coef:?}");
    }

    #[test]
    fn constant_response_is_separation() {
        let x = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        assert!(matches!(
            fit_logistic(&x, &[1.0; 4], &LogisticOptions::default()),
            Err(Error::SeparationDetected { .. })
        ));
    }

    #[test]
    fn collinear_design_is_singular() {
        let col = [0.3, -1.0, 0.7, 2.0, -0.4, 1.1];
        let x = DMatrix::from_fn(6, 2, |i, _| col[i]);
        let y = [1.0, 0.0, 0.0, 1.0, 1.0, 0.0];
        assert_eq!(
            fit_logistic(&x, &y, &LogisticOptions::default()),
            Err(Error::SingularInformation)
        );
    }
}
