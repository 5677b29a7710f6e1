//! Sensitivity analysis for departures from monotonicity.
//!
//! `eta(X) = P(S = 01 | X) / P(S = 10 | X)`; `eta = 0` is monotonicity.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::contrast::EstimandSpec;
use crate::data::{Dataset, StratumId};
use crate::error::{Error, Result};
use crate::estimators::{dml_with_source, tr_with_rule, BundleSource, ScoreRule};
use crate::report::EstimateReport;

const TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensitivityForm {
    Constant,
    #[default]
    Proportional,
}

impl FromStr for SensitivityForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "proportional" => Ok(Self::Proportional),
            other => Err(Error::Config(format!("unknown sensitivity form `{other}`"))),
        }
    }
}

impl fmt::Display for SensitivityForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Constant => "constant",
            Self::Proportional => "proportional",
        })
    }
}

/// `eta(X) = eta0` (constant) or `eta0 * bound(X)` (proportional), where
/// `bound` is [`eta_feasible_bound`] capped at 1 (it exceeds 1 only when
/// `p1 < p0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityFunction {
    pub form: SensitivityForm,
    pub eta0: f64,
}

impl SensitivityFunction {
    pub fn constant(eta0: f64) -> Self {
        Self {
            form: SensitivityForm::Constant,
            eta0,
        }
    }

    pub fn proportional(eta0: f64) -> Self {
        Self {
            form: SensitivityForm::Proportional,
            eta0,
        }
    }

    pub fn eta(&self, p1: f64, p0: f64) -> f64 {
        match self.form {
            SensitivityForm::Constant => self.eta0,
            SensitivityForm::Proportional => self.eta0 * eta_feasible_bound(p1, p0).min(1.0),
        }
    }
}

/// Largest `eta` keeping every principal score nonnegative:
/// `1 - (p1 - p0) / min(p1, 1 - p0)`.
pub fn eta_feasible_bound(p1: f64, p0: f64) -> f64 {
    1.0 - (p1 - p0) / p1.min(1.0 - p0)
}

/// Principal scores without monotonicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaScores {
    pub e10: f64,
    pub e01: f64,
    pub e00: f64,
    pub e11: f64,
}

impl EtaScores {
    pub fn get(&self, s: StratumId) -> f64 {
        match s {
            StratumId::S10 => self.e10,
            StratumId::S01 => self.e01,
            StratumId::S00 => self.e00,
            StratumId::S11 => self.e11,
        }
    }
}

/// `(c0, c1, c2)` with `e_s = c0 + c1 p1 + c2 p0` at the given `eta`.
pub(crate) fn score_coefficients(s: StratumId, eta: f64) -> (f64, f64, f64) {
    let k = 1.0 / (1.0 - eta);
    match s {
        StratumId::S10 => (0.0, k, -k),
        StratumId::S01 => (0.0, eta * k, -eta * k),
        StratumId::S00 => (1.0, -k, k - 1.0),
        StratumId::S11 => (0.0, 1.0 - k, k),
    }
}

pub fn eta_principal_scores(p1: f64, p0: f64, eta: f64) -> Result<EtaScores> {
    if (eta - 1.0).abs() < TOL {
        return Err(Error::EtaIsOne);
    }
    let bound = eta_feasible_bound(p1, p0);
    if eta < -TOL || eta > bound + TOL {
        return Err(Error::EtaInfeasible { eta, bound });
    }
    let gap = (p1 - p0) / (1.0 - eta);
    let raw = [gap, eta * gap, 1.0 - p0 - gap, p1 - gap];
    // crossing probabilities (p1 < p0) admit no nonnegative solution
    if raw.iter().any(|&v| v < -TOL) {
        return Err(Error::EtaInfeasible { eta, bound });
    }
    let [e10, e01, e00, e11] = raw.map(|v| v.max(0.0));
    Ok(EtaScores { e10, e01, e00, e11 })
}

/// Sensitivity-adjusted estimator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensitivityEstimator {
    Tr,
    Dml,
}

/// Runs the eta-adjusted estimator for each requested estimand (any of the
/// four strata). At `eta = 0` the three monotone strata reproduce the
/// standard estimators.
pub fn sensitivity_estimate<S: BundleSource>(
    data: &Dataset,
    source: &S,
    estimands: &[EstimandSpec],
    eta: SensitivityFunction,
    estimator: SensitivityEstimator,
    folds: usize,
    seed: u64,
) -> Result<Vec<EstimateReport>> {
    let rule = ScoreRule::Sensitivity(eta);
    match estimator {
        SensitivityEstimator::Tr => {
            let all: Vec<usize> = (0..data.len()).collect();
            let bundle = source.fit(data, &all)?;
            tr_with_rule(data, &bundle, estimands, rule)
        }
        SensitivityEstimator::Dml => dml_with_source(data, source, estimands, rule, folds, seed),
    }
}
