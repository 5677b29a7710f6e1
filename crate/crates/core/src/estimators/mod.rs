//! Point estimators: doubly robust stratum proportions, plug-in
//! U-statistics, the triply robust scaled U-statistic and its cross-fitted
//! counterpart.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod dml;
mod kernel;
mod partition;
mod run;
mod terms;

pub use dml::{dml_estimate, dml_with_partition, BundleSource, FixedBundle};
pub use kernel::{estimate_all, kernel_g, plugin_estimate, tr_estimate, KernelContext};
pub use partition::{partition_pairs, PairPartition};
pub use run::{run_estimators, CrossFit};
pub use terms::{estimate_pz_dr, psi_dz, ScoreRule};

pub(crate) use dml::dml_with_source;
pub(crate) use kernel::tr_with_rule;

/// Which nuisance models a plug-in estimator relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PluginMode {
    /// Propensity and principal scores.
    PiP,
    /// Propensity and pairwise outcome means.
    PiMu,
    /// Principal scores and pairwise outcome means.
    PMu,
}

impl PluginMode {
    pub fn estimator(&self) -> Estimator {
        match self {
            PluginMode::PiP => Estimator::M1,
            PluginMode::PiMu => Estimator::M2,
            PluginMode::PMu => Estimator::M3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    M1,
    M2,
    M3,
    Tr,
    Dml,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [
        Estimator::M1,
        Estimator::M2,
        Estimator::M3,
        Estimator::Tr,
        Estimator::Dml,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Estimator::M1 => "m1",
            Estimator::M2 => "m2",
            Estimator::M3 => "m3",
            Estimator::Tr => "tr",
            Estimator::Dml => "dml",
        }
    }

    pub fn plugin_mode(&self) -> Option<PluginMode> {
        match self {
            Estimator::M1 => Some(PluginMode::PiP),
            Estimator::M2 => Some(PluginMode::PiMu),
            Estimator::M3 => Some(PluginMode::PMu),
            _ => None,
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown estimator `{s}` (expected m1, m2, m3, tr or dml)")))
    }
}
