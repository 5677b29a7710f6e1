use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Least-squares fit of `y` on `[1, x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFit {
    /// Intercept first.
    pub coef: Vec<f64>,
    /// Residual SD with denominator `n - coef.len()`.
    pub sigma: f64,
    pub rss: f64,
    pub df: usize,
}

impl GaussianFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.coef[0] + self.coef[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

pub fn fit_gaussian_outcome(x: &DMatrix<f64>, y: &[f64]) -> Result<GaussianFit> {
    let (n, p) = x.shape();
    let k = p + 1;
    if y.len() != n {
        return Err(Error::Config(format!(
            "design has {n} rows but response has {}",
            y.len()
        )));
    }
    if n <= k {
        return Err(Error::TooFewRows {
            needed: k + 1,
            found: n,
        });
    }
    let xa = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
    let qr = xa.clone().qr();
    let r = qr.r();
    let rmax = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..k).any(|i| !(r[(i, i)].abs() > 1e-10 * rmax)) {
        return Err(Error::RankDeficientDesign);
    }
    let qty = qr.q().transpose() * DVector::from_column_slice(y);
    let coef = r.solve_upper_triangular(&qty).ok_or(Error::RankDeficientDesign)?;
    let fitted = &xa * &coef;
    let rss: f64 = fitted.iter().zip(y).map(|(f, t)| (t - f) * (t - f)).sum();
    let df = n - k;
    Ok(GaussianFit {
        coef: coef.iter().copied().collect(),
        sigma: (rss / df as f64).sqrt(),
        rss,
        df,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_linear_recovered() {
        let x = DMatrix::from_fn(10, 2, |i, j| ((i * 7 + j * 3) % 5) as f64 + 0.1 * (i as f64));
        let y: Vec<f64> = (0..10).map(|i| 1.5 - 2.0 * x[(i, 0)] + 0.5 * x[(i, 1)]).collect();
        let fit = fit_gaussian_outcome(&x, &y).unwrap();
        for (b, t) in fit.coef.iter().zip([1.5, -2.0, 0.5]) {
            assert!((b - t).abs() < 1e-10);
        }
        assert!(fit.sigma < 1e-10);
    }

    #[test]
    fn alternating_residuals_give_closed_form_sigma() {
        // x is symmetric around zero and orthogonal to the alternating sign
        // pattern, so the residuals are exactly +-1.
        let xs = [-2.0, -2.0, -1.0, -1.0, 1.0, 1.0, 2.0, 2.0];
        let x = DMatrix::from_column_slice(8, 1, &xs);
        let y: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, v)| 3.0 + v + if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let fit = fit_gaussian_outcome(&x, &y).unwrap();
        assert!((fit.sigma - (8.0f64 / 6.0).sqrt()).abs() < 1e-12);
        assert!((fit.coef[0] - 3.0).abs() < 1e-12);
        assert!((fit.coef[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_column_is_rank_deficient() {
        let x = DMatrix::from_fn(6, 2, |i, _| i as f64 * 0.7 - 1.0);
        let y = [1.0, 2.0, 0.5, 3.0, 2.5, 1.0];
        assert_eq!(fit_gaussian_outcome(&x, &y), Err(Error::RankDeficientDesign));
    }
}
