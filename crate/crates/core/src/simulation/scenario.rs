//! Replicated simulation studies over misspecification scenarios.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::{generate, DgpKind, DgpSpec};
use crate::contrast::{summarize, ContrastFunction, EstimandSpec, Summary};
use crate::data::StratumId;
use crate::error::{Error, Result};
use crate::estimators::{run_estimators, CrossFit, Estimator, ScoreRule};
use crate::inference::{mc_oracle_truth, OracleTruth};
use crate::nuisance::{NuisanceFitter, NuisanceSpec};
use crate::sensitivity::SensitivityFunction;
use crate::stats::{mean, sample_sd};

/// Which nuisance components are fitted on the raw covariates. The others
/// see the transformed covariates and are misspecified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Correctness {
    /// Treatment propensity.
    pub tp: bool,
    /// Principal score (intermediate probabilities).
    pub ps: bool,
    /// Outcome model.
    pub oc: bool,
}

impl Correctness {
    pub const ALL_CORRECT: Correctness = Correctness {
        tp: true,
        ps: true,
        oc: true,
    };

    /// All-correct plus the three single-misspecification scenarios.
    pub fn grid() -> [Correctness; 4] {
        [
            Self::ALL_CORRECT,
            Correctness {
                tp: false,
                ..Self::ALL_CORRECT
            },
            Correctness {
                ps: false,
                ..Self::ALL_CORRECT
            },
            Correctness {
                oc: false,
                ..Self::ALL_CORRECT
            },
        ]
    }

    /// `tp+ps+oc` style label listing the correct components.
    pub fn label(&self) -> String {
        let parts: Vec<&str> = [(self.tp, "tp"), (self.ps, "ps"), (self.oc, "oc")]
            .iter()
            .filter(|(on, _)| *on)
            .map(|(_, l)| *l)
            .collect();
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("+")
        }
    }
}

impl Default for Correctness {
    fn default() -> Self {
        Self::ALL_CORRECT
    }
}

impl fmt::Display for Correctness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Correctness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut c = Correctness {
            tp: false,
            ps: false,
            oc: false,
        };
        let s = s.trim();
        if s == "none" {
            return Ok(c);
        }
        for part in s.split('+') {
            let flag = match part.trim() {
                "tp" => &mut c.tp,
                "ps" => &mut c.ps,
                "oc" => &mut c.oc,
                other => return Err(Error::Config(format!("unknown scenario component `{other}`"))),
            };
            if *flag {
                return Err(Error::Config(format!("scenario component `{part}` repeated")));
            }
            *flag = true;
        }
        Ok(c)
    }
}

impl Serialize for Correctness {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for Correctness {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

fn default_estimators() -> Vec<Estimator> {
    Estimator::ALL.to_vec()
}

fn default_strata() -> Vec<StratumId> {
    StratumId::MONOTONE.to_vec()
}

fn default_contrast() -> ContrastFunction {
    ContrastFunction::GeqIndicator
}

fn default_folds() -> usize {
    5
}

fn default_oracle_draws() -> usize {
    1_000_000
}

fn default_learners() -> NuisanceSpec {
    NuisanceSpec::parametric()
}

/// One scenario: a DGP, a misspecification pattern and the estimators to
/// replicate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub dgp: DgpKind,
    #[serde(default)]
    pub correct: Correctness,
    pub n: usize,
    pub reps: usize,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Estimator>,
    #[serde(default = "default_strata")]
    pub strata: Vec<StratumId>,
    #[serde(default = "default_contrast")]
    pub contrast: ContrastFunction,
    #[serde(default)]
    pub summary: Summary,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Draws for the Monte Carlo truth; 0 skips it.
    #[serde(default = "default_oracle_draws")]
    pub oracle_draws: usize,
    /// Learners before the misspecification pattern is applied.
    #[serde(default = "default_learners")]
    pub learners: NuisanceSpec,
    /// Monotonicity violation in the DGP; estimators use the matching
    /// proportional sensitivity function when positive.
    #[serde(default)]
    pub eta0: f64,
}

impl ScenarioSpec {
    pub fn new(dgp: DgpKind, correct: Correctness, n: usize, reps: usize) -> Self {
        Self {
            dgp,
            correct,
            n,
            reps,
            estimators: default_estimators(),
            strata: default_strata(),
            contrast: default_contrast(),
            summary: Summary::Raw,
            seed: 0,
            folds: default_folds(),
            oracle_draws: default_oracle_draws(),
            learners: default_learners(),
            eta0: 0.0,
        }
    }

    pub fn label(&self) -> String {
        self.correct.label()
    }

    pub fn estimands(&self) -> Result<Vec<EstimandSpec>> {
        self.strata
            .iter()
            .map(|&s| EstimandSpec::new(s, self.contrast.clone(), self.summary))
            .collect()
    }

    /// Component names in output order: the contrast components, then the
    /// summary when it is not the raw first component.
    pub fn components(&self) -> Vec<String> {
        let mut names = match &self.contrast {
            ContrastFunction::WinPair => vec!["win".to_string(), "loss".to_string()],
            h if h.dim() == 1 => vec![h.name().to_string()],
            h => (0..h.dim()).map(|k| format!("{}_{k}", h.name())).collect(),
        };
        if self.summary != Summary::Raw {
            names.push(self.summary.as_str().to_string());
        }
        names
    }

    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.estimators.is_empty() || self.strata.is_empty() {
            return Err(Error::Config("need at least one estimator and one stratum".into()));
        }
        if self.eta0 == 0.0 && self.strata.contains(&StratumId::S01) {
            return Err(Error::StratumRequiresSensitivity(StratumId::S01));
        }
        Ok(())
    }

    fn rule(&self) -> ScoreRule {
        if self.eta0 > 0.0 {
            ScoreRule::Sensitivity(SensitivityFunction::proportional(self.eta0))
        } else {
            ScoreRule::Monotone
        }
    }
}

/// One estimate: a component of one estimator's output for one stratum in
/// one replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRow {
    pub estimator: Estimator,
    pub stratum: StratumId,
    pub scenario: String,
    pub replicate: usize,
    pub component: String,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub estimator: Estimator,
    pub stratum: StratumId,
    pub scenario: String,
    pub component: String,
    pub reps: usize,
    pub mean: f64,
    pub sd: f64,
    /// `sd / sqrt(reps)`.
    pub mc_se: f64,
    pub truth: Option<f64>,
    pub bias: Option<f64>,
    pub rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    /// Ordered by estimator (as listed), stratum, replicate, component.
    pub rows: Vec<ReplicationRow>,
    pub aggregates: Vec<Aggregate>,
    /// Monte Carlo truths per stratum, when computed.
    pub truths: Vec<(StratumId, OracleTruth)>,
}

impl ScenarioResult {
    pub fn aggregate(&self, estimator: Estimator, stratum: StratumId, component: &str) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.estimator == estimator && a.stratum == stratum && a.component == component)
    }

    pub fn estimates(&self, estimator: Estimator, stratum: StratumId, component: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.estimator == estimator && r.stratum == stratum && r.component == component)
            .map(|r| r.estimate)
            .collect()
    }
}

/// Seed of replicate `r`: the `r`-th stream of a generator keyed by `seed`.
pub fn replicate_seed(seed: u64, r: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    rng.next_u64()
}

/// Seed used for a scenario's Monte Carlo truth.
pub fn oracle_seed(seed: u64) -> u64 {
    replicate_seed(seed, usize::MAX)
}

/// Runs `reps` replicates in parallel and aggregates them against the
/// Monte Carlo truth.
pub fn run_scenario(s: &ScenarioSpec) -> Result<ScenarioResult> {
    s.validate()?;
    let estimands = s.estimands()?;
    let dgp = DgpSpec::new(s.dgp).with_eta0(s.eta0);
    let nuisance = s
        .learners
        .clone()
        .with_correct(s.correct.tp, s.correct.ps, s.correct.oc);
    let fitter = NuisanceFitter::new(nuisance, &s.strata);
    let rule = s.rule();
    let components = s.components();
    let dim = s.contrast.dim();

    // values[r][estimand][estimator][component]
    let values: Vec<Vec<Vec<Vec<f64>>>> = (0..s.reps)
        .into_par_iter()
        .map(|r| {
            let seed = replicate_seed(s.seed, r);
            let sim = generate(&dgp, s.n, seed)?;
            let cf = CrossFit { folds: s.folds, seed };
            let reports = run_estimators(&sim.data, &fitter, &estimands, &s.estimators, rule, cf)?;
            Ok(reports
                .chunks(s.estimators.len())
                .map(|per_spec| {
                    per_spec
                        .iter()
                        .map(|rep| {
                            let mut v = rep.point.clone();
                            if s.summary != Summary::Raw {
                                v.push(rep.summary_value);
                            }
                            v
                        })
                        .collect()
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let truths: Vec<(StratumId, OracleTruth)> = if s.oracle_draws > 0 {
        estimands
            .iter()
            .map(|e| {
                Ok((
                    e.stratum,
                    mc_oracle_truth(&dgp, e, s.oracle_draws, oracle_seed(s.seed))?,
                ))
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let scenario = s.label();
    let mut rows = Vec::with_capacity(s.reps * estimands.len() * s.estimators.len() * components.len());
    let mut aggregates = Vec::new();
    for (ei, &estimator) in s.estimators.iter().enumerate() {
        for (si, &stratum) in s.strata.iter().enumerate() {
            for r in 0..s.reps {
                for (c, name) in components.iter().enumerate() {
                    rows.push(ReplicationRow {
                        estimator,
                        stratum,
                        scenario: scenario.clone(),
                        replicate: r,
                        component: name.clone(),
                        estimate: values[r][si][ei][c],
                    });
                }
            }
            for (c, name) in components.iter().enumerate() {
                let est: Vec<f64> = (0..s.reps).map(|r| values[r][si][ei][c]).collect();
                let truth = truths.get(si).map(|(_, t)| {
                    if c < dim {
                        Ok(t.value[c])
                    } else {
                        summarize(s.summary, &t.value)
                    }
                });
                let truth = truth.transpose()?;
                let m = mean(&est);
                let sd = if est.len() > 1 { sample_sd(&est) } else { 0.0 };
                aggregates.push(Aggregate {
                    estimator,
                    stratum,
                    scenario: scenario.clone(),
                    component: name.clone(),
                    reps: s.reps,
                    mean: m,
                    sd,
                    mc_se: sd / (s.reps as f64).sqrt(),
                    truth,
                    bias: truth.map(|t| m - t),
                    rmse: truth.map(|t| mean(&est.iter().map(|v| (v - t).powi(2)).collect::<Vec<_>>()).sqrt()),
                });
            }
        }
    }
    Ok(ScenarioResult {
        rows,
        aggregates,
        truths,
    })
}

/// Writes replication rows with header
/// `estimator,stratum,scenario,replicate,component,estimate`.
pub fn write_replications<W: Write>(rows: &[ReplicationRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["estimator", "stratum", "scenario", "replicate", "component", "estimate"])?;
    for r in rows {
        w.write_record([
            r.estimator.label().to_string(),
            r.stratum.to_string(),
            r.scenario.clone(),
            r.replicate.to_string(),
            r.component.clone(),
            format!("{}", r.estimate),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one summary line per (estimator, stratum, scenario, component).
pub fn write_aggregates<W: Write>(aggs: &[Aggregate], writer: W) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x}"));
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "estimator",
        "stratum",
        "scenario",
        "component",
        "reps",
        "mean",
        "sd",
        "mc_se",
        "truth",
        "bias",
        "rmse",
    ])?;
    for a in aggs {
        w.write_record([
            a.estimator.label().to_string(),
            a.stratum.to_string(),
            a.scenario.clone(),
            a.component.clone(),
            a.reps.to_string(),
            format!("{}", a.mean),
            format!("{}", a.sd),
            format!("{}", a.mc_se),
            opt(a.truth),
            opt(a.bias),
            opt(a.rmse),
        ])?;
    }
    w.flush()?;
    Ok(())
}
