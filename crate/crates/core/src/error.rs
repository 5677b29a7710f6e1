use thiserror::Error;

use crate::data::StratumId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // dataset validation
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("row {row}: {field} = {value} is not binary")]
    InvalidBinary {
        row: usize,
        field: &'static str,
        value: i64,
    },
    #[error("row {row}: outcome is undefined but d = 1")]
    UndefinedOutcomeWithD1 { row: usize },
    #[error("row {row}: expected {expected} covariates, found {found}")]
    DimensionMismatch { row: usize, expected: usize, found: usize },
    #[error("row {row}: ordinal outcome {value} outside 1..={levels}")]
    InvalidCategory { row: usize, value: f64, levels: usize },
    #[error("row {row}: outcome {value} is not finite")]
    NonFiniteValue { row: usize, value: f64 },

    // contrasts and summaries
    #[error("contrast evaluated on an undefined outcome")]
    UndefinedOutcome,
    #[error("win ratio requires a positive loss probability, got {0}")]
    ZeroLossProbability(f64),
    #[error("summary {summary} needs a {expected}-dimensional contrast, got {found}")]
    SummaryDimension {
        summary: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("point estimate has length {found}, contrast has dimension {expected}")]
    PointLength { expected: usize, found: usize },

    // nuisance fitting
    #[error("complete or quasi-complete separation detected (coefficient norm {norm:.3e})")]
    SeparationDetected { norm: f64 },
    #[error("information matrix is singular")]
    SingularInformation,
    #[error("{solver} did not converge after {iterations} iterations (max |score| = {score:.3e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        score: f64,
    },
    #[error("design matrix is rank deficient")]
    RankDeficientDesign,
    #[error("ordinal category {0} never observed")]
    MissingCategory(usize),
    #[error("cutpoints are not strictly increasing")]
    NonmonotoneCutpoints,
    #[error("need at least {needed} rows to fit, got {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("sigma must be positive, got {0}")]
    NonpositiveSigma(f64),
    #[error("not a probability vector: {0}")]
    NotAProbabilityVector(String),
    #[error("observed cell (z={z}, d={d}) has no rows with a defined outcome")]
    EmptyCell { z: u8, d: u8 },
    #[error("unknown learner kind `{0}`")]
    UnknownLearner(String),
    #[error("learner `{kind}`: {message}")]
    LearnerConfig { kind: String, message: String },
    #[error("covariate transform is singular (|1 + x1| = {0:.3e})")]
    SingularTransform(f64),

    // estimators
    #[error("stratum proportion estimate {0:.3e} is too close to zero")]
    DenominatorNearZero(f64),
    #[error("stratum {0} requires the sensitivity-analysis path")]
    StratumRequiresSensitivity(StratumId),
    #[error("invalid fold count K = {k} for n = {n}")]
    BadK { n: usize, k: usize },
    #[error("estimator is missing the {0} nuisance component")]
    MissingNuisance(&'static str),

    // sensitivity
    #[error("sensitivity value eta = 1 makes the principal scores unidentifiable")]
    EtaIsOne,
    #[error("eta = {eta} is infeasible (bound {bound})")]
    EtaInfeasible { eta: f64, bound: f64 },
    #[error("eta0 = {eta0} is infeasible at {count} of {n} units (smallest bound {min_bound:.4})")]
    EtaInfeasibleAtSomeX {
        eta0: f64,
        count: usize,
        n: usize,
        min_bound: f64,
    },

    // inference and simulation
    #[error("bootstrap needs at least 2 replicates, got {0}")]
    TooFewReplicates(usize),
    #[error("{failed} of {total} bootstrap replicates failed")]
    TooManyFailedReplicates { failed: usize, total: usize },
    #[error("no simulated unit fell in stratum {0}")]
    EmptyStratum(StratumId),

    // configuration and IO
    #[error("config: {0}")]
    Config(String),
    #[error("parse: {0}")]
    Parse(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
            _ => Error::Parse(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
