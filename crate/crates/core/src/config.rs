//! JSON run configuration shared by the command-line entry points.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::contrast::{ContrastFunction, EstimandSpec, Summary};
use crate::data::{OutcomeKind, StratumId};
use crate::error::{Error, Result};
use crate::estimators::Estimator;
use crate::nuisance::{Clipping, LearnerSpec, NuisanceSpec};
use crate::sensitivity::{SensitivityEstimator, SensitivityForm};

pub const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn default_estimators() -> Vec<Estimator> {
    vec![Estimator::Tr]
}

fn default_strata() -> Vec<StratumId> {
    StratumId::MONOTONE.to_vec()
}

fn default_contrast() -> ContrastFunction {
    ContrastFunction::Difference
}

fn default_outcome_kind() -> OutcomeKind {
    OutcomeKind::Continuous
}

fn default_learner() -> LearnerSpec {
    LearnerSpec::new("parametric")
}

fn default_folds() -> usize {
    5
}

fn default_replicates() -> usize {
    1000
}

fn default_level() -> f64 {
    0.95
}

fn default_true() -> bool {
    true
}

fn default_eta_grid() -> Vec<f64> {
    vec![0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    /// Off unless set; `replicates` and `level` are still echoed.
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    /// Draw a fresh fold assignment for the cross-fitted estimator in each
    /// replicate.
    #[serde(default = "default_true")]
    pub rerandomize_folds: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            replicates: default_replicates(),
            level: default_level(),
            rerandomize_folds: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityConfig {
    #[serde(default)]
    pub form: SensitivityForm,
    #[serde(default = "default_eta_grid")]
    pub eta0: Vec<f64>,
    #[serde(default = "default_sensitivity_estimator")]
    pub estimator: SensitivityEstimator,
}

fn default_sensitivity_estimator() -> SensitivityEstimator {
    SensitivityEstimator::Tr
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self {
            form: SensitivityForm::default(),
            eta0: default_eta_grid(),
            estimator: SensitivityEstimator::Tr,
        }
    }
}

/// Configuration of an estimation or sensitivity run. Every field has a
/// default, so `{}` is a valid config; the resolved values are echoed into
/// the JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "schema_version")]
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default = "default_outcome_kind")]
    pub outcome_kind: OutcomeKind,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Estimator>,
    #[serde(default = "default_strata")]
    pub strata: Vec<StratumId>,
    #[serde(default = "default_contrast")]
    pub contrast: ContrastFunction,
    #[serde(default)]
    pub summary: Summary,
    #[serde(default = "default_learner")]
    pub propensity: LearnerSpec,
    #[serde(default = "default_learner")]
    pub intermediate: LearnerSpec,
    #[serde(default = "default_learner")]
    pub outcome: LearnerSpec,
    #[serde(default)]
    pub clipping: Clipping,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    #[serde(default)]
    pub sensitivity: SensitivityConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema {} (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators selected".into()));
        }
        if self.strata.is_empty() {
            return Err(Error::Config("no strata selected".into()));
        }
        if !(self.bootstrap.level > 0.0 && self.bootstrap.level < 1.0) {
            return Err(Error::Config(format!(
                "level must be in (0, 1), got {}",
                self.bootstrap.level
            )));
        }
        if self.bootstrap.enabled && self.bootstrap.replicates < 2 {
            return Err(Error::TooFewReplicates(self.bootstrap.replicates));
        }
        if let OutcomeKind::Ordinal(q) = self.outcome_kind {
            if q < 2 {
                return Err(Error::Config(format!(
                    "ordinal outcome needs at least 2 levels, got {q}"
                )));
            }
        }
        if self.sensitivity.eta0.is_empty() {
            return Err(Error::Config("empty eta0 grid".into()));
        }
        self.estimands()?;
        Ok(())
    }

    pub fn nuisance(&self) -> NuisanceSpec {
        NuisanceSpec {
            propensity: self.propensity.clone(),
            intermediate: self.intermediate.clone(),
            outcome: self.outcome.clone(),
            clipping: self.clipping,
        }
    }

    pub fn estimands(&self) -> Result<Vec<EstimandSpec>> {
        self.strata
            .iter()
            .map(|&s| EstimandSpec::new(s, self.contrast.clone(), self.summary))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_has_documented_defaults() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c.schema, 1);
        assert_eq!(c.clipping.epsilon, 0.01);
        assert_eq!(c.bootstrap.replicates, 1000);
        assert_eq!(c.bootstrap.level, 0.95);
        assert_eq!(c.folds, 5);
        assert_eq!(c.estimators, vec![Estimator::Tr]);
        let echoed = serde_json::to_value(&c).unwrap();
        assert_eq!(echoed["clipping"]["epsilon"], 0.01);
        assert_eq!(echoed["propensity"]["kind"], "parametric");
    }

    #[test]
    fn full_config_parses() {
        let c = RunConfig::from_json(
            r#"{
                "schema": 1,
                "outcome_kind": {"ordinal": 3},
                "estimators": ["m1", "tr", "dml"],
                "strata": ["10", "00"],
                "contrast": "win_pair",
                "summary": "win_ratio",
                "outcome": {"kind": "knn", "hyperparameters": {"k": 15}},
                "bootstrap": {"enabled": true, "replicates": 200},
                "sensitivity": {"form": "constant", "eta0": [0.1, 0.2]}
            }"#,
        )
        .unwrap();
        assert_eq!(c.outcome_kind, OutcomeKind::Ordinal(3));
        assert_eq!(c.nuisance().outcome.kind, "knn");
        assert_eq!(c.estimands().unwrap().len(), 2);
        assert_eq!(c.sensitivity.form, SensitivityForm::Constant);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(RunConfig::from_json(r#"{"schema": 2}"#).is_err());
        assert!(RunConfig::from_json(r#"{"estimator": "tr"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"estimators": ["m4"]}"#).is_err());
        assert!(RunConfig::from_json(r#"{"contrast": "geq", "summary": "win_ratio"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"bootstrap": {"level": 1.5}}"#).is_err());
    }
}
