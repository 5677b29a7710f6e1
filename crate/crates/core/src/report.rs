use serde::{Deserialize, Serialize};

use crate::contrast::Summary;
use crate::data::StratumId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub stratum: StratumId,
    pub estimator: String,
    pub contrast: String,
    pub summary: Summary,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Propensity or intermediate predictions moved by clipping.
    pub clip_events: u64,
    /// Units whose complier score hit the floor.
    pub floored_units: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub replicates: usize,
    pub failed: usize,
    pub level: f64,
    pub se: Vec<f64>,
    /// Percentile interval per component.
    pub ci: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary_se: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary_ci: Option<(f64, f64)>,
}

/// Point estimate per contrast component, as `numerator / denominator`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub point: Vec<f64>,
    pub summary_value: f64,
    pub numerator: Vec<f64>,
    pub denominator: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapSummary>,
    pub meta: ReportMeta,
}

impl EstimateReport {
    pub fn se(&self) -> Option<&[f64]> {
        self.bootstrap.as_ref().map(|b| b.se.as_slice())
    }

    pub fn ci(&self) -> Option<&[(f64, f64)]> {
        self.bootstrap.as_ref().map(|b| b.ci.as_slice())
    }
}
