//! Shared fixtures: a fixed nuisance bundle and a literal double-loop
//! transcription of the plug-in and triply robust estimators.

#![allow(dead_code)]

use std::sync::Arc;

use pgce::nuisance::{CellModels, Clipping, FnOutcome, FnProbability, NuisanceBundle, Predictive};
use pgce::{Dataset, Observation, OutcomeKind, StratumId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

pub fn phi_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / std::f64::consts::SQRT_2)
}

pub fn pi_fn(x: &[f64]) -> f64 {
    0.2 + 0.6 * sigmoid(0.8 * x[0] - 0.3 * x[1])
}

pub fn p0_fn(x: &[f64]) -> f64 {
    0.05 + 0.3 * sigmoid(x[1])
}

pub fn p1_fn(x: &[f64]) -> f64 {
    0.5 + 0.45 * sigmoid(0.5 * x[0] + x[1])
}

/// Normal outcome profile in cell `(z, d)`.
pub fn profile(z: u8, d: u8, x: &[f64]) -> (f64, f64) {
    let mean = 0.5 * f64::from(z) + 0.8 * f64::from(d) + 0.6 * x[0] - 0.4 * x[1] * f64::from(z);
    let sd = 1.0 + 0.25 * f64::from(d) + 0.1 * x[0].abs();
    (mean, sd)
}

pub fn fixed_bundle() -> NuisanceBundle {
    let mut cells = CellModels::new();
    for z in 0..2u8 {
        for d in 0..2u8 {
            cells.insert(
                z,
                d,
                Arc::new(FnOutcome::new(move |x| {
                    let (mean, sd) = profile(z, d, x);
                    Predictive::Normal { mean, sd }
                })),
            );
        }
    }
    NuisanceBundle::from_parts(
        Arc::new(FnProbability::new(pi_fn)),
        Arc::new(FnProbability::new(p0_fn)),
        Arc::new(FnProbability::new(p1_fn)),
        Some(cells),
        Clipping::NONE,
    )
}

pub fn random_dataset(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let obs = (0..n)
        .map(|_| {
            let x = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let z = u8::from(rng.random::<f64>() < 0.5);
            let d = u8::from(rng.random::<f64>() < 0.5);
            let y = rng.random_range(-3.0..3.0);
            Observation::new(x, z, d, Some(y))
        })
        .collect();
    Dataset::new(obs, OutcomeKind::Continuous)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BruteContrast {
    Difference,
    Geq,
}

#[derive(Debug, Clone, Copy)]
pub struct Brute {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub tr: f64,
}

/// Plug-in (pi+p, pi+mu, p+mu) and triply robust estimates under
/// monotonicity, written out term by term over ordered pairs.
pub fn brute_force(data: &Dataset, s: StratumId, h: BruteContrast) -> Brute {
    let obs = data.observations();
    let n = obs.len();
    // (treated cell d, control cell d) and score coefficients (c0, c1, c2)
    let (d1, d2, c0, c1, c2) = match s {
        StratumId::S10 => (1u8, 0u8, 0.0, 1.0, -1.0),
        StratumId::S00 => (0, 0, 1.0, -1.0, 0.0),
        StratumId::S11 => (1, 1, 0.0, 0.0, 1.0),
        StratumId::S01 => unreachable!(),
    };
    let score = |x: &[f64]| match s {
        StratumId::S10 => p1_fn(x) - p0_fn(x),
        StratumId::S00 => 1.0 - p1_fn(x),
        _ => p0_fn(x),
    };
    let contrast = |a: f64, b: f64| match h {
        BruteContrast::Difference => a - b,
        BruteContrast::Geq => f64::from(a >= b),
    };
    let mu = |xi: &[f64], xj: &[f64]| {
        let (m1, s1) = profile(1, d1, xi);
        let (m0, s0) = profile(0, d2, xj);
        match h {
            BruteContrast::Difference => m1 - m0,
            BruteContrast::Geq => phi_cdf((m1 - m0) / (s1 * s1 + s0 * s0).sqrt()),
        }
    };
    let unit = |o: &Observation| {
        let x = &o.x;
        let (pi, p0, p1) = (pi_fn(x), p0_fn(x), p1_fn(x));
        let z = f64::from(o.z);
        let d = f64::from(o.d);
        let psi1 = z * (d - p1) / pi + p1;
        let psi0 = (1.0 - z) * (d - p0) / (1.0 - pi) + p0;
        let phi = c0 + c1 * psi1 + c2 * psi0;
        let e = score(x);
        let pd1 = if d1 == 1 { p1 } else { 1.0 - p1 };
        let pd2 = if d2 == 1 { p0 } else { 1.0 - p0 };
        let treated = if o.z == 1 && o.d == d1 { e / (pi * pd1) } else { 0.0 };
        let control = if o.z == 0 && o.d == d2 {
            e / ((1.0 - pi) * pd2)
        } else {
            0.0
        };
        let b = c0 * z / pi + c1 * z * d / pi + c2 * (1.0 - z) * d / (1.0 - pi);
        (phi, e, treated, control, b)
    };
    let (mut m1, mut m2, mut m3, mut tr) = (0.0, 0.0, 0.0, 0.0);
    let mut phi_sum = 0.0;
    for i in 0..n {
        let (phi_i, e_i, t_i, _, b_i) = unit(&obs[i]);
        phi_sum += phi_i;
        for j in 0..n {
            if i == j {
                continue;
            }
            let (phi_j, e_j, _, c_j, b_j) = unit(&obs[j]);
            let m = mu(&obs[i].x, &obs[j].x);
            let w = t_i * c_j;
            let hv = if w != 0.0 {
                contrast(obs[i].y.unwrap(), obs[j].y.unwrap())
            } else {
                0.0
            };
            m1 += w * hv;
            m2 += b_i * b_j * m;
            m3 += e_i * e_j * m;
            tr += w * (hv - m) + phi_i * phi_j * m;
        }
    }
    let pairs = (n * (n - 1)) as f64;
    let denom = (phi_sum / n as f64).powi(2);
    Brute {
        m1: m1 / pairs / denom,
        m2: m2 / pairs / denom,
        m3: m3 / pairs / denom,
        tr: tr / pairs / denom,
    }
}
