//! Simulation DGPs and the replication harness.

mod dgp;
mod scenario;

pub use dgp::{
    gen_dgp_gaussian, gen_dgp_ordinal, generate, oracle_bundle, transform_covariates, true_intermediate, true_outcome,
    true_propensity, DgpKind, DgpSpec, PotentialOutcomes, SimulatedData,
};
pub use scenario::{
    oracle_seed, replicate_seed, run_scenario, write_aggregates, write_replications, Aggregate, Correctness,
    ReplicationRow, ScenarioResult, ScenarioSpec,
};

pub(crate) use dgp::draw_unit;
