use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::stats::{order_statistic, sample_sd};

/// Share of failed replicates above which the bootstrap is abandoned.
pub const MAX_FAILURE_SHARE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    /// Replicate SD per component.
    pub se: Vec<f64>,
    /// Percentile interval per component.
    pub ci: Vec<(f64, f64)>,
    /// Estimates per replicate in replicate order; `None` where the
    /// estimator failed.
    pub replicates: Vec<Option<Vec<f64>>>,
    pub failed: usize,
    pub level: f64,
}

impl BootstrapResult {
    /// Successful replicate values of one component.
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.replicates.iter().flatten().map(|r| r[k]).collect()
    }
}

/// Replicate `b` draws its resample and its own seed from stream `b` of a
/// ChaCha generator keyed by `seed`, so replicates are independent of
/// scheduling.
fn replicate_rng(seed: u64, b: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b as u64);
    rng
}

/// Nonparametric bootstrap. `estimator(resample, replicate_seed)` must refit
/// everything it needs; it returns the estimate vector. Percentile bounds
/// are order statistics, so they commute with monotone transforms (a
/// log-scale interval for a ratio, exponentiated back, is identical).
pub fn bootstrap_ci<F>(
    data: &Dataset,
    estimator: F,
    replicates: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapResult>
where
    F: Fn(&Dataset, u64) -> Result<Vec<f64>> + Sync,
{
    if replicates < 2 {
        return Err(Error::TooFewReplicates(replicates));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!(
            "confidence level must be in (0, 1), got {level}"
        )));
    }
    let n = data.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let results: Vec<Option<Vec<f64>>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = replicate_rng(seed, b);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let rep_seed = rng.next_u64();
            estimator(&data.subset(&idx), rep_seed).ok()
        })
        .collect();
    let failed = results.iter().filter(|r| r.is_none()).count();
    if failed as f64 > MAX_FAILURE_SHARE * replicates as f64 {
        return Err(Error::TooManyFailedReplicates {
            failed,
            total: replicates,
        });
    }
    let dim = results.iter().flatten().next().map_or(0, Vec::len);
    if results.iter().flatten().any(|r| r.len() != dim) {
        return Err(Error::Config("bootstrap replicates returned different lengths".into()));
    }
    let alpha = 1.0 - level;
    let mut se = Vec::with_capacity(dim);
    let mut ci = Vec::with_capacity(dim);
    for k in 0..dim {
        let mut vals: Vec<f64> = results.iter().flatten().map(|r| r[k]).collect();
        se.push(sample_sd(&vals));
        vals.sort_by(f64::total_cmp);
        ci.push((
            order_statistic(&vals, alpha / 2.0),
            order_statistic(&vals, 1.0 - alpha / 2.0),
        ));
    }
    Ok(BootstrapResult {
        se,
        ci,
        replicates: results,
        failed,
        level,
    })
}
