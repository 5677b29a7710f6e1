//! Monte Carlo truths from fully simulated potential-outcome tables.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::contrast::{summarize, ContrastFunction, EstimandSpec, MAX_DIM};
use crate::data::StratumId;
use crate::error::{Error, Result};
use crate::simulation::{draw_unit, true_intermediate, DgpSpec, PotentialOutcomes};
use crate::stats::{mean, sample_sd};

const CHUNK: usize = 1 << 14;
/// Pairings used for contrasts without a sort-based exact evaluation.
const SHUFFLES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleTruth {
    /// Truth per contrast component.
    pub value: Vec<f64>,
    /// Monte Carlo standard error per component.
    pub se: Vec<f64>,
    /// Summary of `value` (equal to `value[0]` for raw estimands).
    pub summary_value: f64,
    pub stratum_units: usize,
    pub draws: usize,
}

/// Simulates `draws` units in parallel chunks, each on its own ChaCha
/// stream, so the result does not depend on the thread count.
pub fn simulate_population(dgp: &DgpSpec, draws: usize, seed: u64) -> Result<Vec<([f64; 4], PotentialOutcomes)>> {
    let chunks = draws.div_ceil(CHUNK);
    let parts: Vec<Vec<([f64; 4], PotentialOutcomes)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = CHUNK.min(draws - c * CHUNK);
            (0..len)
                .map(|_| draw_unit(&mut rng, dgp).map(|(x, _, po)| (x, po)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().flatten().collect())
}

/// `E[h{Y_a(1), Y_b(0)} | S_a = S_b = s]` for independent units `a != b`.
///
/// Built-in contrasts are averaged over every ordered cross pair of the
/// simulated stratum members (sorting makes this `O(m log m)`); custom
/// contrasts use repeated shuffled pairings. The standard error is the
/// U-statistic rate `2 sd(k1) / sqrt(m)` with `k1` the first Hoeffding
/// projection.
pub fn mc_oracle_truth(dgp: &DgpSpec, spec: &EstimandSpec, draws: usize, seed: u64) -> Result<OracleTruth> {
    let pop = simulate_population(dgp, draws, seed)?;
    let (y1, y0): (Vec<f64>, Vec<f64>) = pop
        .iter()
        .filter(|(_, po)| po.stratum() == spec.stratum)
        .map(|(_, po)| (po.y1, po.y0))
        .unzip();
    let m = y1.len();
    if m < 2 {
        return Err(Error::EmptyStratum(spec.stratum));
    }
    let (value, k1) = match &spec.contrast {
        ContrastFunction::Difference => difference(&y1, &y0),
        ContrastFunction::GeqIndicator => ranks(&y1, &y0, true),
        ContrastFunction::WinPair => ranks(&y1, &y0, false),
        h @ ContrastFunction::Custom(_) => shuffled(h, &y1, &y0, seed),
    };
    let se = k1.iter().map(|k| 2.0 * sample_sd(k) / (m as f64).sqrt()).collect();
    let summary_value = summarize(spec.summary, &value)?;
    Ok(OracleTruth {
        value,
        se,
        summary_value,
        stratum_units: m,
        draws,
    })
}

/// Monte Carlo `E{p_z(X)}` using the true intermediate model.
pub fn mc_oracle_pz(dgp: &DgpSpec, z: u8, draws: usize, seed: u64) -> Result<f64> {
    let pop = simulate_population(dgp, draws, seed)?;
    let p: Vec<f64> = if dgp.eta0 == 0.0 {
        pop.iter().map(|(x, _)| true_intermediate(z, x)).collect()
    } else {
        pop.iter()
            .map(|(_, po)| f64::from(if z == 1 { po.d1 } else { po.d0 }))
            .collect()
    };
    Ok(mean(&p))
}

/// Share of each stratum in a simulated population, in `StratumId::ALL`
/// order.
pub fn mc_stratum_shares(dgp: &DgpSpec, draws: usize, seed: u64) -> Result<[f64; 4]> {
    let pop = simulate_population(dgp, draws, seed)?;
    let mut out = [0.0; 4];
    for (_, po) in &pop {
        let k = StratumId::ALL
            .iter()
            .position(|&s| s == po.stratum())
            .expect("known stratum");
        out[k] += 1.0;
    }
    Ok(out.map(|c| c / pop.len() as f64))
}

type Projection = (Vec<f64>, Vec<Vec<f64>>);

fn difference(y1: &[f64], y0: &[f64]) -> Projection {
    let (m1, m0) = (mean(y1), mean(y0));
    let k1 = y1.iter().zip(y0).map(|(a, b)| 0.5 * ((a - m0) + (m1 - b))).collect();
    (vec![m1 - m0], vec![k1])
}

/// Exact cross-pair averages of `1(u >= v)`, or of `(1(u > v), 1(u < v))`.
fn ranks(y1: &[f64], y0: &[f64], geq: bool) -> Projection {
    let m = y1.len();
    let mf = m as f64;
    let mut s1 = y1.to_vec();
    let mut s0 = y0.to_vec();
    s1.sort_by(f64::total_cmp);
    s0.sort_by(f64::total_cmp);
    let below = |s: &[f64], v: f64| s.partition_point(|&w| w < v) as f64;
    let at_or_below = |s: &[f64], v: f64| s.partition_point(|&w| w <= v) as f64;
    let ind = |c: bool| f64::from(u8::from(c));
    // counts over b != a with unit a as the treated member (y1_a vs y0_b)
    // and as the control member (y1_b vs y0_a)
    let relations: Vec<Box<dyn Fn(f64, f64) -> (f64, f64)>> = if geq {
        vec![Box::new(|u, v| {
            (at_or_below(&s0, u) - ind(v <= u), mf - below(&s1, v) - ind(u >= v))
        })]
    } else {
        vec![
            Box::new(|u, v| (below(&s0, u) - ind(v < u), mf - at_or_below(&s1, v) - ind(u > v))),
            Box::new(|u, v| (mf - at_or_below(&s0, u) - ind(v > u), below(&s1, v) - ind(u < v))),
        ]
    };
    let denom = mf - 1.0;
    let mut value = Vec::with_capacity(relations.len());
    let mut k1 = Vec::with_capacity(relations.len());
    for rel in &relations {
        let mut total = 0.0;
        let proj: Vec<f64> = y1
            .iter()
            .zip(y0)
            .map(|(&u, &v)| {
                let (t, c) = rel(u, v);
                total += t;
                0.5 * (t + c) / denom
            })
            .collect();
        value.push(total / (mf * denom));
        k1.push(proj);
    }
    (value, k1)
}

fn shuffled(h: &ContrastFunction, y1: &[f64], y0: &[f64], seed: u64) -> Projection {
    let m = y1.len();
    let dim = h.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut perm: Vec<usize> = (0..m).collect();
    let mut sums = vec![0.0; dim];
    let mut k1 = vec![vec![0.0; m]; dim];
    let mut out = [0.0; MAX_DIM];
    for _ in 0..SHUFFLES {
        perm.shuffle(&mut rng);
        for t in 0..m {
            let (a, b) = (perm[t], perm[(t + 1) % m]);
            h.eval_into(y1[a], y0[b], &mut out);
            for c in 0..dim {
                sums[c] += out[c];
                k1[c][a] += 0.5 * out[c];
                k1[c][b] += 0.5 * out[c];
            }
        }
    }
    let pairs = (SHUFFLES * m) as f64;
    for k in &mut k1 {
        for v in k.iter_mut() {
            *v /= SHUFFLES as f64;
        }
    }
    (sums.iter().map(|s| s / pairs).collect(), k1)
}
