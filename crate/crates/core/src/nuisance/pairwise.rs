//! Pairwise outcome means `E{h(Y1, Y2)}` for two independent units with
//! known predictive distributions.

use super::Predictive;
use crate::contrast::{ContrastFunction, MAX_DIM};
use crate::error::{Error, Result};
use crate::stats::{gauss_hermite_normal, norm_cdf};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// `Phi{(f1 - f2) / (sqrt(2) sigma)}`: probability that the first of two
/// homoscedastic Gaussian outcomes is at least the second.
pub fn pairwise_mean_gaussian(f1: f64, f2: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::NonpositiveSigma(sigma));
    }
    Ok(norm_cdf((f1 - f2) / (SQRT_2 * sigma)))
}

fn check_probability_vector(p: &[f64]) -> Result<()> {
    if p.is_empty() || p.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::NotAProbabilityVector(format!(
            "{p:?} has negative or missing entries"
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-8 {
        return Err(Error::NotAProbabilityVector(format!("entries sum to {s}")));
    }
    Ok(())
}

/// `(P(Y1 > Y2), P(Y1 < Y2))` for independent categorical outcomes.
pub fn pairwise_mean_ordinal(p1: &[f64], p2: &[f64]) -> Result<(f64, f64)> {
    check_probability_vector(p1)?;
    check_probability_vector(p2)?;
    if p1.len() != p2.len() {
        return Err(Error::NotAProbabilityVector(format!(
            "lengths differ ({} vs {})",
            p1.len(),
            p2.len()
        )));
    }
    let (win, loss, _) = categorical_compare(p1, p2);
    Ok((win, loss))
}

/// (win, loss, tie) by cumulative sums.
fn categorical_compare(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let total_b: f64 = b.iter().sum();
    let mut below = 0.0; // P(Y2 < q)
    let (mut win, mut loss, mut tie) = (0.0, 0.0, 0.0);
    for (aq, bq) in a.iter().zip(b) {
        let above = total_b - below - bq;
        win += aq * below;
        loss += aq * above;
        tie += aq * bq;
        below += bq;
    }
    (win, loss, tie)
}

// P(X > 0) and P(X >= 0) for X ~ N(delta, s^2); s = 0 is a point mass.
#[inline]
fn prob_gt(delta: f64, s: f64) -> f64 {
    if s > 0.0 {
        norm_cdf(delta / s)
    } else if delta > 0.0 {
        1.0
    } else {
        0.0
    }
}

#[inline]
fn prob_ge(delta: f64, s: f64) -> f64 {
    if s > 0.0 {
        norm_cdf(delta / s)
    } else if delta >= 0.0 {
        1.0
    } else {
        0.0
    }
}

fn atoms(p: &Predictive) -> Vec<(f64, f64)> {
    match p {
        Predictive::Normal { mean, sd } => gauss_hermite_normal()
            .iter()
            .map(|&(x, w)| (mean + sd * x, w))
            .collect(),
        Predictive::Categorical(probs) => probs.iter().enumerate().map(|(q, &w)| ((q + 1) as f64, w)).collect(),
    }
}

/// Writes `E{h(Y1, Y2)}` into `out[..h.dim()]` for `Y1 ~ a`, `Y2 ~ b`
/// independent. Built-in contrasts are exact; custom contrasts against a
/// Gaussian use Gauss-Hermite quadrature.
#[inline]
pub fn pair_mean(h: &ContrastFunction, a: &Predictive, b: &Predictive, out: &mut [f64]) {
    use ContrastFunction as C;
    use Predictive::{Categorical as Cat, Normal};
    match (h, a, b) {
        (C::Difference, _, _) => out[0] = a.mean() - b.mean(),
        (C::GeqIndicator | C::WinPair, Normal { mean: m1, sd: s1 }, Normal { mean: m2, sd: s2 }) => {
            let s = (s1 * s1 + s2 * s2).sqrt();
            let delta = m1 - m2;
            if let C::GeqIndicator = h {
                out[0] = prob_ge(delta, s);
            } else {
                out[0] = prob_gt(delta, s);
                out[1] = prob_gt(-delta, s);
            }
        }
        (C::GeqIndicator | C::WinPair, Cat(pa), Cat(pb)) => {
            let (win, loss, tie) = categorical_compare(pa, pb);
            if let C::GeqIndicator = h {
                out[0] = win + tie;
            } else {
                out[0] = win;
                out[1] = loss;
            }
        }
        (C::GeqIndicator | C::WinPair, Normal { mean, sd }, Cat(pb)) => {
            let (mut ge, mut gt, mut lt) = (0.0, 0.0, 0.0);
            for (q, w) in pb.iter().enumerate() {
                let delta = mean - (q + 1) as f64;
                ge += w * prob_ge(delta, *sd);
                gt += w * prob_gt(delta, *sd);
                lt += w * prob_gt(-delta, *sd);
            }
            if let C::GeqIndicator = h {
                out[0] = ge;
            } else {
                out[0] = gt;
                out[1] = lt;
            }
        }
        (C::GeqIndicator | C::WinPair, Cat(pa), Normal { mean, sd }) => {
            let (mut ge, mut gt, mut lt) = (0.0, 0.0, 0.0);
            for (q, w) in pa.iter().enumerate() {
                let delta = (q + 1) as f64 - mean;
                ge += w * prob_ge(delta, *sd);
                gt += w * prob_gt(delta, *sd);
                lt += w * prob_gt(-delta, *sd);
            }
            if let C::GeqIndicator = h {
                out[0] = ge;
            } else {
                out[0] = gt;
                out[1] = lt;
            }
        }
        (C::Custom(_), _, _) => {
            let dim = h.dim();
            let mut acc = [0.0; MAX_DIM];
            let mut buf = [0.0; MAX_DIM];
            let (xa, xb) = (atoms(a), atoms(b));
            for &(u, wu) in &xa {
                for &(v, wv) in &xb {
                    h.eval_into(u, v, &mut buf);
                    for k in 0..dim {
                        acc[k] += wu * wv * buf[k];
                    }
                }
            }
            out[..dim].copy_from_slice(&acc[..dim]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contrast::CustomContrast;
    use proptest::prelude::*;

    fn brute_force(p1: &[f64], p2: &[f64]) -> (f64, f64) {
        let (mut w, mut l) = (0.0, 0.0);
        for (q, a) in p1.iter().enumerate() {
            for (r, b) in p2.iter().enumerate() {
                if q > r {
                    w += a * b;
                } else if q < r {
                    l += a * b;
                }
            }
        }
        (w, l)
    }

    #[test]
    fn gaussian_reference_points() {
        assert_eq!(pairwise_mean_gaussian(1.0, 1.0, 2.0).unwrap(), 0.5);
        let v = pairwise_mean_gaussian(SQRT_2 * 0.7, 0.0, 0.7).unwrap();
        assert!((v - 0.841_345).abs() < 1e-6);
        assert!(pairwise_mean_gaussian(10.0, 0.0, 1.0).unwrap() > 0.999_999);
        assert_eq!(pairwise_mean_gaussian(0.0, 0.0, 0.0), Err(Error::NonpositiveSigma(0.0)));
    }

    #[test]
    fn ordinal_degenerate_and_uniform() {
        assert_eq!(
            pairwise_mean_ordinal(&[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]).unwrap(),
            (1.0, 0.0)
        );
        let u = [1.0 / 3.0; 3];
        let (w, l) = pairwise_mean_ordinal(&u, &u).unwrap();
        assert!((w - 1.0 / 3.0).abs() < 1e-15 && (l - 1.0 / 3.0).abs() < 1e-15);
        assert!(pairwise_mean_ordinal(&[0.5, 0.6], &[0.5, 0.5]).is_err());
        assert!(pairwise_mean_ordinal(&[1.5, -0.5], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn ordinal_matches_double_loop_for_q5() {
        let p1 = [0.1, 0.25, 0.05, 0.4, 0.2];
        let p2 = [0.3, 0.1, 0.2, 0.15, 0.25];
        let (w, l) = pairwise_mean_ordinal(&p1, &p2).unwrap();
        let (bw, bl) = brute_force(&p1, &p2);
        assert!((w - bw).abs() < 1e-15 && (l - bl).abs() < 1e-15);
    }

    #[test]
    fn custom_contrast_by_quadrature() {
        let first = ContrastFunction::Custom(CustomContrast::new("u", 1, |u, _, o| o[0] = u).unwrap());
        let sq = ContrastFunction::Custom(CustomContrast::new("sq", 1, |u, v, o| o[0] = (u - v) * (u - v)).unwrap());
        let a = Predictive::Normal { mean: 2.0, sd: 1.5 };
        let b = Predictive::Normal { mean: -1.0, sd: 0.5 };
        let mut out = [0.0; 4];
        pair_mean(&first, &a, &b, &mut out);
        assert!((out[0] - 2.0).abs() < 1e-10);
        pair_mean(&sq, &a, &b, &mut out);
        assert!((out[0] - (9.0 + 2.25 + 0.25)).abs() < 1e-9);
    }

    #[test]
    fn normal_against_categorical() {
        let a = Predictive::Normal { mean: 2.0, sd: 0.0 };
        let b = Predictive::Categorical(vec![0.2, 0.5, 0.3]);
        let mut out = [0.0; 4];
        pair_mean(&ContrastFunction::GeqIndicator, &a, &b, &mut out);
        assert!((out[0] - 0.7).abs() < 1e-15);
        pair_mean(&ContrastFunction::WinPair, &a, &b, &mut out);
        assert!((out[0] - 0.2).abs() < 1e-15 && (out[1] - 0.3).abs() < 1e-15);
    }

    fn prob_vec(q: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.01f64..1.0, q).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn gaussian_complement(f1 in -20.0f64..20.0, f2 in -20.0f64..20.0, s in 0.05f64..5.0) {
            let a = pairwise_mean_gaussian(f1, f2, s).unwrap();
            let b = pairwise_mean_gaussian(f2, f1, s).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }

        #[test]
        fn gaussian_monotone(f in -5.0f64..5.0, step in 0.01f64..2.0, s in 0.1f64..3.0) {
            let lo = pairwise_mean_gaussian(f, 0.0, s).unwrap();
            let hi = pairwise_mean_gaussian(f + step, 0.0, s).unwrap();
            prop_assert!(hi >= lo);
        }

        #[test]
        fn ordinal_self_comparison_symmetric(p in prob_vec(4)) {
            let (w, l) = pairwise_mean_ordinal(&p, &p).unwrap();
            prop_assert!((w - l).abs() < 1e-14);
        }

        #[test]
        fn ordinal_matches_brute_force(p1 in prob_vec(5), p2 in prob_vec(5)) {
            let (w, l) = pairwise_mean_ordinal(&p1, &p2).unwrap();
            let (bw, bl) = brute_force(&p1, &p2);
            prop_assert!((w - bw).abs() < 1e-14 && (l - bl).abs() < 1e-14);
            prop_assert!(w >= 0.0 && l >= 0.0 && w + l <= 1.0 + 1e-14);
        }
    }
}
