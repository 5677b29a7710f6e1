//! Bootstrap inference and Monte Carlo truths.

mod bootstrap;
mod oracle;

pub use bootstrap::{bootstrap_ci, BootstrapResult, MAX_FAILURE_SHARE};
pub use oracle::{mc_oracle_pz, mc_oracle_truth, mc_stratum_shares, simulate_population, OracleTruth};
