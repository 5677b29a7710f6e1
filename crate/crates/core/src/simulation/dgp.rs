//! Data-generating processes with retained potential outcomes.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Observation, OutcomeKind, StratumId};
use crate::error::{Error, Result};
use crate::nuisance::{CellModels, Clipping, FnOutcome, FnProbability, NuisanceBundle, Predictive};
use crate::sensitivity::{eta_principal_scores, SensitivityFunction};
use crate::stats::expit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DgpKind {
    /// Gaussian outcome driven by the covariates.
    #[serde(rename = "gaussian")]
    Gaussian,
    /// Gaussian outcome with no covariate effect (`Y(z) ~ N(10 + 2z - D(z), 1)`).
    #[serde(rename = "gaussian-null-x")]
    GaussianNullX,
    /// Three-category proportional-odds outcome.
    #[serde(rename = "ordinal")]
    Ordinal,
}

impl DgpKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DgpKind::Gaussian => "gaussian",
            DgpKind::GaussianNullX => "gaussian-null-x",
            DgpKind::Ordinal => "ordinal",
        }
    }

    pub fn outcome_kind(&self) -> OutcomeKind {
        match self {
            DgpKind::Ordinal => OutcomeKind::Ordinal(3),
            _ => OutcomeKind::Continuous,
        }
    }
}

impl fmt::Display for DgpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DgpKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "gaussian-null-x" => Ok(Self::GaussianNullX),
            "ordinal" => Ok(Self::Ordinal),
            other => Err(Error::Config(format!("unknown dgp `{other}`"))),
        }
    }
}

/// A DGP plus the strength of the monotonicity violation. With
/// `eta0 > 0` the 01 stratum has `P(01 | X) = eta(X) P(10 | X)` for the
/// proportional sensitivity function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub kind: DgpKind,
    #[serde(default)]
    pub eta0: f64,
}

impl DgpSpec {
    pub fn new(kind: DgpKind) -> Self {
        Self { kind, eta0: 0.0 }
    }

    pub fn with_eta0(mut self, eta0: f64) -> Self {
        self.eta0 = eta0;
        self
    }
}

/// Complete potential-outcome record for one simulated unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialOutcomes {
    pub d0: u8,
    pub d1: u8,
    pub y0: f64,
    pub y1: f64,
}

impl PotentialOutcomes {
    pub fn stratum(&self) -> StratumId {
        StratumId::from_potentials(self.d1, self.d0)
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub data: Dataset,
    pub potentials: Vec<PotentialOutcomes>,
}

const ZETA: [f64; 2] = [-1.0, 1.0];

pub fn true_propensity(x: &[f64]) -> f64 {
    expit(-x[0] + 0.5 * x[1] - 0.25 * x[2] - 0.1 * x[3])
}

/// `P(D(z) = 1 | X)`.
pub fn true_intermediate(z: u8, x: &[f64]) -> f64 {
    expit(-1.0 + 2.0 * f64::from(z) + x[0] - 0.8 * x[1] + 0.6 * x[2] - x[3])
}

/// Law of `Y(z)` given `D(z) = d` and `X`.
pub fn true_outcome(kind: DgpKind, z: u8, d: u8, x: &[f64]) -> Predictive {
    let (z, d) = (f64::from(z), f64::from(d));
    match kind {
        DgpKind::Gaussian => Predictive::Normal {
            mean: 10.0 + 2.0 * z - d + 8.0 * x[0] + 6.0 * x[1] + 9.0 * x[2] + 7.0 * x[3],
            sd: 1.0,
        },
        DgpKind::GaussianNullX => Predictive::Normal {
            mean: 10.0 + 2.0 * z - d,
            sd: 1.0,
        },
        DgpKind::Ordinal => {
            let lin = 2.0 * z - d + x[0] - x[1] + 1.2 * x[2] - 0.8 * x[3];
            let c1 = expit(ZETA[0] + lin);
            let c2 = expit(ZETA[1] + lin);
            Predictive::Categorical(vec![c1, c2 - c1, 1.0 - c2])
        }
    }
}

/// The true nuisance functions as a bundle (outcome models for all cells).
pub fn oracle_bundle(kind: DgpKind, clipping: Clipping) -> NuisanceBundle {
    let mut cells = CellModels::new();
    for z in 0..2u8 {
        for d in 0..2u8 {
            cells.insert(z, d, Arc::new(FnOutcome::new(move |x| true_outcome(kind, z, d, x))));
        }
    }
    NuisanceBundle::from_parts(
        Arc::new(FnProbability::new(true_propensity)),
        Arc::new(FnProbability::new(|x| true_intermediate(0, x))),
        Arc::new(FnProbability::new(|x| true_intermediate(1, x))),
        Some(cells),
        clipping,
    )
}

/// `(X~1, X~2, X~3, X~4) = (exp(x1/2), x2/(1+x1), (x2 x3/25 + 0.6)^3, x3 x4/sqrt 2)`.
pub fn transform_covariates(x: [f64; 4]) -> Result<[f64; 4]> {
    let denom = 1.0 + x[0];
    if denom.abs() < 1e-8 {
        return Err(Error::SingularTransform(x[0]));
    }
    Ok([
        (0.5 * x[0]).exp(),
        x[1] / denom,
        (x[1] * x[2] / 25.0 + 0.6).powi(3),
        x[2] * x[3] / std::f64::consts::SQRT_2,
    ])
}

fn draw_outcome<R: Rng>(rng: &mut R, law: &Predictive) -> f64 {
    match law {
        Predictive::Normal { mean, sd } => {
            let e: f64 = StandardNormal.sample(rng);
            mean + sd * e
        }
        Predictive::Categorical(p) => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (q, w) in p.iter().enumerate() {
                acc += w;
                if u < acc {
                    return (q + 1) as f64;
                }
            }
            p.len() as f64
        }
    }
}

/// One unit: covariates, assignment and the potential table.
pub(crate) fn draw_unit<R: Rng>(rng: &mut R, spec: &DgpSpec) -> Result<([f64; 4], u8, PotentialOutcomes)> {
    let mut x = [0.0; 4];
    for v in x.iter_mut().take(3) {
        *v = StandardNormal.sample(rng);
    }
    x[3] = f64::from(u8::from(Bernoulli::new(0.5).expect("valid").sample(rng)));
    let z = u8::from(rng.random::<f64>() < true_propensity(&x));
    let p1 = true_intermediate(1, &x);
    let p0 = true_intermediate(0, &x);
    let eta = SensitivityFunction::proportional(spec.eta0).eta(p1, p0);
    let s = eta_principal_scores(p1, p0, eta)?;
    // a single uniform against cumulative thresholds in the order 11, 10,
    // 01, 00; at eta = 0 this is D(z) = 1(U < p_z)
    let u: f64 = rng.random();
    let (d1, d0) = if u < s.e11 {
        (1, 1)
    } else if u < s.e11 + s.e10 {
        (1, 0)
    } else if u < s.e11 + s.e10 + s.e01 {
        (0, 1)
    } else {
        (0, 0)
    };
    let y1 = draw_outcome(rng, &true_outcome(spec.kind, 1, d1, &x));
    let y0 = draw_outcome(rng, &true_outcome(spec.kind, 0, d0, &x));
    Ok((x, z, PotentialOutcomes { d0, d1, y0, y1 }))
}

pub fn generate(spec: &DgpSpec, n: usize, seed: u64) -> Result<SimulatedData> {
    if !(0.0..1.0).contains(&spec.eta0) {
        return Err(if spec.eta0 == 1.0 {
            Error::EtaIsOne
        } else {
            Error::EtaInfeasible {
                eta: spec.eta0,
                bound: 1.0,
            }
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obs = Vec::with_capacity(n);
    let mut potentials = Vec::with_capacity(n);
    for _ in 0..n {
        let (x, z, po) = draw_unit(&mut rng, spec)?;
        let (d, y) = if z == 1 { (po.d1, po.y1) } else { (po.d0, po.y0) };
        obs.push(Observation::new(x.to_vec(), z, d, Some(y)));
        potentials.push(po);
    }
    Ok(SimulatedData {
        data: Dataset::new(obs, spec.kind.outcome_kind()),
        potentials,
    })
}

pub fn gen_dgp_gaussian(n: usize, seed: u64, eta0: f64) -> Result<SimulatedData> {
    generate(&DgpSpec::new(DgpKind::Gaussian).with_eta0(eta0), n, seed)
}

pub fn gen_dgp_ordinal(n: usize, seed: u64) -> Result<SimulatedData> {
    generate(&DgpSpec::new(DgpKind::Ordinal), n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::validate_dataset;

    #[test]
    fn reference_values_at_zero() {
        let x = [0.0; 4];
        assert_eq!(true_propensity(&x), 0.5);
        assert!((true_intermediate(1, &x) - 0.731_058_578_6).abs() < 1e-9);
        assert_eq!(true_outcome(DgpKind::Gaussian, 1, 1, &x).mean(), 11.0);
        let Predictive::Categorical(p) = true_outcome(DgpKind::Ordinal, 0, 0, &x) else {
            panic!()
        };
        for (a, b) in p.iter().zip([0.268_941_421, 0.462_117_157, 0.268_941_421]) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn transform_examples() {
        let t = transform_covariates([0.0; 4]).unwrap();
        assert_eq!(t[0], 1.0);
        assert_eq!(t[1], 0.0);
        assert!((t[2] - 0.216).abs() < 1e-15);
        assert_eq!(t[3], 0.0);
        let t = transform_covariates([2.0, 1.0, 0.0, 0.0]).unwrap();
        assert!((t[0] - std::f64::consts::E).abs() < 1e-15);
        assert!((t[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(
            transform_covariates([-1.0, 0.0, 0.0, 0.0]),
            Err(Error::SingularTransform(-1.0))
        );
    }

    #[test]
    fn monotone_at_zero_eta_and_defiers_otherwise() {
        let sim = gen_dgp_gaussian(5000, 11, 0.0).unwrap();
        assert!(sim.potentials.iter().all(|p| p.d1 >= p.d0));
        let sim = gen_dgp_gaussian(5000, 11, 0.4).unwrap();
        let defiers = sim.potentials.iter().filter(|p| p.stratum() == StratumId::S01).count();
        assert!(defiers > 50);
    }

    #[test]
    fn generated_data_is_valid_and_deterministic() {
        let a = gen_dgp_ordinal(200, 4).unwrap();
        let b = gen_dgp_ordinal(200, 4).unwrap();
        assert_eq!(a.data.observations(), b.data.observations());
        assert!(validate_dataset(a.data).is_ok());
        assert!(gen_dgp_gaussian(10, 1, 1.0).is_err());
    }

    #[test]
    fn ordinal_probabilities_sum_to_one() {
        for i in 0..50 {
            let t = i as f64 / 7.0 - 3.0;
            let x = [t, -0.5 * t, 0.3 * t, f64::from(i % 2)];
            let Predictive::Categorical(p) = true_outcome(DgpKind::Ordinal, (i % 2) as u8, 1, &x) else {
                panic!()
            };
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }
}
