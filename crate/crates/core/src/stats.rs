//! Small numerical helpers shared across modules.

use std::sync::OnceLock;

use libm::erfc;
use nalgebra::{DMatrix, SymmetricEigen};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal CDF.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    if x < -38.0 {
        return 0.0;
    }
    0.5 * erfc(-x / SQRT_2)
}

#[inline]
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (denominator `n - 1`); zero for fewer than two values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Order statistic at probability `q` of an ascending-sorted slice, taking
/// the `ceil(q * n)`-th smallest value (inverse empirical CDF).
pub fn order_statistic(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let k = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

/// Nodes and weights for `E f(Z)`, `Z ~ N(0, 1)`, by Golub-Welsch.
pub fn gauss_hermite_normal() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let m = 24;
        let mut jacobi = DMatrix::<f64>::zeros(m, m);
        for k in 1..m {
            let b = (k as f64).sqrt();
            jacobi[(k - 1, k)] = b;
            jacobi[(k, k - 1)] = b;
        }
        let eig = SymmetricEigen::new(jacobi);
        let mut rule: Vec<(f64, f64)> = (0..m)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], v0 * v0)
            })
            .collect();
        rule.sort_by(|a, b| a.0.total_cmp(&b.0));
        rule
    })
}
