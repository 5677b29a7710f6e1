//! Principal generalized causal effects: pairwise-contrast estimands within
//! principal strata, estimated by plug-in, triply robust and cross-fitted
//! U-statistics, with bootstrap inference, a monotonicity sensitivity
//! analysis and a simulation harness.

pub mod config;
pub mod contrast;
pub mod data;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod nuisance;
pub mod pipeline;
pub mod report;
pub mod sensitivity;
pub mod simulation;
pub mod stats;

pub use config::RunConfig;
pub use contrast::{eval_contrast, summarize_estimand, ContrastFunction, CustomContrast, EstimandSpec, Summary};
pub use data::{read_csv, validate_dataset, write_csv, Dataset, Observation, OutcomeKind, StratumId};
pub use error::{Error, Result};
pub use estimators::{
    dml_estimate, estimate_all, estimate_pz_dr, kernel_g, partition_pairs, plugin_estimate, run_estimators,
    tr_estimate, CrossFit, Estimator, KernelContext, PairPartition, PluginMode, ScoreRule,
};
pub use inference::{bootstrap_ci, mc_oracle_truth, BootstrapResult, OracleTruth};
pub use nuisance::{
    fit_nuisance_bundle, Clipping, LearnerRegistry, LearnerSpec, NuisanceBundle, NuisanceFitter, NuisanceSpec,
};
pub use pipeline::{run_estimate, run_sensitivity, RunOutput};
pub use report::{BootstrapSummary, EstimateReport, ReportMeta};
pub use sensitivity::{
    eta_feasible_bound, eta_principal_scores, sensitivity_estimate, SensitivityForm, SensitivityFunction,
};
pub use simulation::{gen_dgp_gaussian, gen_dgp_ordinal, run_scenario, DgpKind, DgpSpec, ScenarioSpec};
