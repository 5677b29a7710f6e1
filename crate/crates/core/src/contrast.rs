//! Contrast functions `h(u, v)` and estimand summaries.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::StratumId;
use crate::error::{Error, Result};

/// Largest supported contrast dimension.
pub const MAX_DIM: usize = 4;

type ContrastFn = dyn Fn(f64, f64, &mut [f64]) + Send + Sync;

/// A user-supplied contrast. `eval` writes `dim` components into its output
/// slice.
#[derive(Clone)]
pub struct CustomContrast {
    name: String,
    dim: usize,
    eval: Arc<ContrastFn>,
}

impl CustomContrast {
    pub fn new<F>(name: impl Into<String>, dim: usize, eval: F) -> Result<Self>
    where
        F: Fn(f64, f64, &mut [f64]) + Send + Sync + 'static,
    {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Config(format!(
                "contrast dimension must be in 1..={MAX_DIM}, got {dim}"
            )));
        }
        Ok(Self {
            name: name.into(),
            dim,
            eval: Arc::new(eval),
        })
    }
}

impl fmt::Debug for CustomContrast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomContrast")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum ContrastFunction {
    /// `u - v`
    Difference,
    /// `1(u >= v)`
    GeqIndicator,
    /// `(1(u > v), 1(u < v))`
    WinPair,
    Custom(CustomContrast),
}

impl ContrastFunction {
    pub fn dim(&self) -> usize {
        match self {
            ContrastFunction::Difference | ContrastFunction::GeqIndicator => 1,
            ContrastFunction::WinPair => 2,
            ContrastFunction::Custom(c) => c.dim,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            ContrastFunction::Difference => "difference",
            ContrastFunction::GeqIndicator => "geq",
            ContrastFunction::WinPair => "win_pair",
            ContrastFunction::Custom(c) => &c.name,
        }
    }

    /// Writes `h(u, v)` into `out[..dim]`.
    #[inline]
    pub fn eval_into(&self, u: f64, v: f64, out: &mut [f64]) {
        match self {
            ContrastFunction::Difference => out[0] = u - v,
            ContrastFunction::GeqIndicator => out[0] = if u >= v { 1.0 } else { 0.0 },
            ContrastFunction::WinPair => {
                out[0] = if u > v { 1.0 } else { 0.0 };
                out[1] = if u < v { 1.0 } else { 0.0 };
            }
            ContrastFunction::Custom(c) => (c.eval)(u, v, &mut out[..c.dim]),
        }
    }
}

/// Custom contrasts compare equal when their names and dimensions match.
impl PartialEq for ContrastFunction {
    fn eq(&self, other: &Self) -> bool {
        self.name() == other.name() && self.dim() == other.dim()
    }
}

impl FromStr for ContrastFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "difference" | "diff" => Ok(ContrastFunction::Difference),
            "geq" | "geq_indicator" | "probabilistic_index" => Ok(ContrastFunction::GeqIndicator),
            "win_pair" | "winpair" | "win" => Ok(ContrastFunction::WinPair),
            other => Err(Error::Parse(format!("unknown contrast `{other}`"))),
        }
    }
}

impl Serialize for ContrastFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ContrastFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Evaluates `h(u, v)` on two outcomes, either of which may be undefined.
pub fn eval_contrast(h: &ContrastFunction, u: Option<f64>, v: Option<f64>) -> Result<Vec<f64>> {
    let (u, v) = match (u, v) {
        (Some(u), Some(v)) => (u, v),
        _ => return Err(Error::UndefinedOutcome),
    };
    let mut out = [0.0; MAX_DIM];
    h.eval_into(u, v, &mut out);
    Ok(out[..h.dim()].to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Summary {
    #[default]
    Raw,
    WinRatio,
    WinDifference,
}

impl Summary {
    pub fn as_str(&self) -> &'static str {
        match self {
            Summary::Raw => "raw",
            Summary::WinRatio => "win_ratio",
            Summary::WinDifference => "win_difference",
        }
    }
}

impl FromStr for Summary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw" => Ok(Summary::Raw),
            "win_ratio" | "wr" => Ok(Summary::WinRatio),
            "win_difference" | "wd" | "net_benefit" => Ok(Summary::WinDifference),
            other => Err(Error::Parse(format!("unknown summary `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EstimandSpec {
    pub stratum: StratumId,
    pub contrast: ContrastFunction,
    pub summary: Summary,
}

impl EstimandSpec {
    pub fn new(stratum: StratumId, contrast: ContrastFunction, summary: Summary) -> Result<Self> {
        if summary != Summary::Raw && contrast.dim() != 2 {
            return Err(Error::SummaryDimension {
                summary: summary.as_str(),
                expected: 2,
                found: contrast.dim(),
            });
        }
        Ok(Self {
            stratum,
            contrast,
            summary,
        })
    }
}

/// Collapses a per-component point estimate into the estimand's scalar.
pub fn summarize_estimand(spec: &EstimandSpec, point: &[f64]) -> Result<f64> {
    if point.len() != spec.contrast.dim() {
        return Err(Error::PointLength {
            expected: spec.contrast.dim(),
            found: point.len(),
        });
    }
    summarize(spec.summary, point)
}

pub(crate) fn summarize(summary: Summary, point: &[f64]) -> Result<f64> {
    match summary {
        Summary::Raw => Ok(point[0]),
        Summary::WinRatio => {
            if point[1] <= 0.0 {
                Err(Error::ZeroLossProbability(point[1]))
            } else {
                Ok(point[0] / point[1])
            }
        }
        Summary::WinDifference => Ok(point[0] - point[1]),
    }
}
