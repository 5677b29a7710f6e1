//! Cumulative-logit (proportional odds) regression,
//! `logit P(Y <= q | x) = cutpoint[q] + x' slope` for `q = 1..Q-1`.
//!
//! The log-likelihood is concave in `(cutpoints, slope)`, so plain Newton
//! with backtracking converges; steps that would break the ordering of the
//! cutpoints are shortened.

use nalgebra::{DMatrix, DVector};

use super::logistic::{solve_spd, ColumnScale};
use crate::error::{Error, Result};
use crate::stats::{expit, logit};

#[derive(Debug, Clone, Copy)]
pub struct OrdinalOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for OrdinalOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalFit {
    pub cutpoints: Vec<f64>,
    pub slope: Vec<f64>,
}

impl OrdinalFit {
    /// Category probabilities for `1..=Q`.
    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let lin: f64 = self.slope.iter().zip(x).map(|(b, v)| b * v).sum();
        let mut probs = Vec::with_capacity(self.cutpoints.len() + 1);
        let mut prev = 0.0;
        for &c in &self.cutpoints {
            let f = expit(c + lin);
            probs.push(f - prev);
            prev = f;
        }
        probs.push(1.0 - prev);
        probs
    }

    fn params(&self) -> Vec<f64> {
        self.cutpoints.iter().chain(&self.slope).copied().collect()
    }
}

/// Log-likelihood, score and Hessian at `params = (cutpoints, slope)`.
/// `y` holds categories `1..=levels`.
pub fn ordinal_log_likelihood(
    params: &[f64],
    x: &DMatrix<f64>,
    y: &[usize],
    levels: usize,
) -> (f64, DVector<f64>, DMatrix<f64>) {
    let m = levels - 1;
    let p = x.ncols();
    let k = m + p;
    let mut ll = 0.0;
    let mut grad = DVector::<f64>::zeros(k);
    let mut hess = DMatrix::<f64>::zeros(k, k);
    let cut = &params[..m];
    let slope = &params[m..];

    for (i, &q) in y.iter().enumerate() {
        let row = x.row(i);
        let lin: f64 = (0..p).map(|j| slope[j] * row[j]).sum();
        // upper boundary (index q-1 in 0-based cutpoints) and lower (q-2)
        let upper = (q <= m).then(|| q - 1);
        let lower = (q >= 2).then(|| q - 2);
        let cdf = |c: Option<usize>, default: f64| c.map_or(default, |c| expit(cut[c] + lin));
        let fu = cdf(upper, 1.0);
        let fl = cdf(lower, 0.0);
        let dens = |f: f64, c: Option<usize>| if c.is_some() { f * (1.0 - f) } else { 0.0 };
        let a = dens(fu, upper);
        let b = dens(fl, lower);
        let a2 = a * (1.0 - 2.0 * fu);
        let b2 = b * (1.0 - 2.0 * fl);
        let prob = (fu - fl).max(1e-300);
        ll += prob.ln();

        let inv = 1.0 / prob;
        let da = a * inv; // d logP / d cut[upper]
        let db = -b * inv; // d logP / d cut[lower]
        let ds = (a - b) * inv; // d logP / d lin
        if let Some(u) = upper {
            grad[u] += da;
        }
        if let Some(l) = lower {
            grad[l] += db;
        }
        for j in 0..p {
            grad[m + j] += ds * row[j];
        }

        let huu = a2 * inv - da * da;
        let hll = -b2 * inv - db * db;
        let hul = -da * db;
        let hus = a2 * inv - da * ds;
        let hls = -b2 * inv - db * ds;
        let hss = (a2 - b2) * inv - ds * ds;
        if let Some(u) = upper {
            hess[(u, u)] += huu;
            for j in 0..p {
                hess[(u, m + j)] += hus * row[j];
                hess[(m + j, u)] += hus * row[j];
            }
        }
        if let Some(l) = lower {
            hess[(l, l)] += hll;
            for j in 0..p {
                hess[(l, m + j)] += hls * row[j];
                hess[(m + j, l)] += hls * row[j];
            }
        }
        if let (Some(u), Some(l)) = (upper, lower) {
            hess[(u, l)] += hul;
            hess[(l, u)] += hul;
        }
        for j in 0..p {
            for jj in 0..p {
                hess[(m + j, m + jj)] += hss * row[j] * row[jj];
            }
        }
    }
    (ll, grad, hess)
}

fn increasing(cut: &[f64]) -> bool {
    cut.windows(2).all(|w| w[1] > w[0])
}

/// Maximum-likelihood fit; `y` holds categories `1..=levels` (as reals).
pub fn fit_ordinal_outcome(x: &DMatrix<f64>, y: &[f64], levels: usize, opts: &OrdinalOptions) -> Result<OrdinalFit> {
    let (n, p) = x.shape();
    if levels < 2 {
        return Err(Error::Config(format!(
            "ordinal outcome needs at least 2 levels, got {levels}"
        )));
    }
    if y.len() != n {
        return Err(Error::Config(format!(
            "design has {n} rows but response has {}",
            y.len()
        )));
    }
    let cats: Vec<usize> = y
        .iter()
        .enumerate()
        .map(|(row, &v)| {
            if v.fract() == 0.0 && v >= 1.0 && v <= levels as f64 {
                Ok(v as usize)
            } else {
                Err(Error::InvalidCategory { row, value: v, levels })
            }
        })
        .collect::<Result<_>>()?;
    let mut counts = vec![0usize; levels];
    for &c in &cats {
        counts[c - 1] += 1;
    }
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(Error::MissingCategory(missing + 1));
    }
    let m = levels - 1;
    if n < m + p + 1 {
        return Err(Error::TooFewRows {
            needed: m + p + 1,
            found: n,
        });
    }

    let (xs, scale) = ColumnScale::standardize(x);
    let x = &xs;
    let mut cum = 0usize;
    let mut fit = OrdinalFit {
        cutpoints: counts[..m]
            .iter()
            .map(|c| {
                cum += c;
                logit(cum as f64 / n as f64)
            })
            .collect(),
        slope: vec![0.0; p],
    };
    let mut params = fit.params();
    let (mut ll, mut grad, mut hess) = ordinal_log_likelihood(&params, x, &cats, levels);

    for iter in 0..=opts.max_iter {
        let max_score = grad.amax();
        if max_score < opts.tol {
            fit.cutpoints = params[..m].to_vec();
            fit.slope = params[m..].to_vec();
            if !increasing(&fit.cutpoints) {
                return Err(Error::NonmonotoneCutpoints);
            }
            let (slope, shift) = scale.unscale(&fit.slope);
            fit.slope = slope;
            fit.cutpoints.iter_mut().for_each(|c| *c += shift);
            return Ok(fit);
        }
        if iter == opts.max_iter {
            break;
        }
        let neg = -&hess;
        let step = solve_spd(&neg, &grad).ok_or(Error::SingularInformation)?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            let cand: Vec<f64> = params.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            if increasing(&cand[..m]) {
                let (cll, cg, ch) = ordinal_log_likelihood(&cand, x, &cats, levels);
                if cll.is_finite() && cll >= ll - 1e-12 * ll.abs().max(1.0) {
                    params = cand;
                    ll = cll;
                    grad = cg;
                    hess = ch;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(Error::NoConvergence {
        solver: "ordinal",
        iterations: opts.max_iter,
        score: grad.amax(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nuisance::logistic::{fit_logistic, LogisticOptions};

    #[test]
    fn intercept_only_cutpoints_are_cumulative_logits() {
        // shares 0.3, 0.5, 0.2 -> cumulative 0.3, 0.8
        let mut y = vec![1.0; 3];
        y.extend([2.0; 5]);
        y.extend([3.0; 2]);
        let x = DMatrix::<f64>::zeros(10, 0);
        let fit = fit_ordinal_outcome(&x, &y, 3, &OrdinalOptions::default()).unwrap();
        assert!((fit.cutpoints[0] - logit(0.3)).abs() < 1e-8);
        assert!((fit.cutpoints[1] - logit(0.8)).abs() < 1e-8);
    }

    #[test]
    fn two_levels_match_logistic_regression() {
        let xs: Vec<f64> = (0..40).map(|i| ((i * 37) % 17) as f64 / 4.0 - 2.0).collect();
        let y: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, v)| {
                if (v * 1.3 + ((i * 13) % 7) as f64 / 3.0 - 1.0) > 0.0 {
                    2.0
                } else {
                    1.0
                }
            })
            .collect();
        let x = DMatrix::from_column_slice(40, 1, &xs);
        let ord = fit_ordinal_outcome(&x, &y, 2, &OrdinalOptions::default()).unwrap();
        let y2: Vec<f64> = y.iter().map(|&v| if v == 2.0 { 1.0 } else { 0.0 }).collect();
        let lr = fit_logistic(&x, &y2, &LogisticOptions::default()).unwrap();
        // P(Y = 2) = expit(-cutpoint - x slope)
        assert!((lr[0] + ord.cutpoints[0]).abs() < 1e-6);
        assert!((lr[1] + ord.slope[0]).abs() < 1e-6);
    }

    #[test]
    fn missing_category_rejected() {
        let x = DMatrix::<f64>::zeros(4, 0);
        assert_eq!(
            fit_ordinal_outcome(&x, &[1.0, 3.0, 3.0, 1.0], 3, &OrdinalOptions::default()),
            Err(Error::MissingCategory(2))
        );
    }

    #[test]
    fn probabilities_sum_to_one() {
        let fit = OrdinalFit {
            cutpoints: vec![-1.0, 0.5, 2.0],
            slope: vec![0.3, -0.7],
        };
        let p = fit.probabilities(&[1.2, -0.4]);
        assert_eq!(p.len(), 4);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(p.iter().all(|&v| v > 0.0));
    }
}
