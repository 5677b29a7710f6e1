use super::dml::{dml_with_source, BundleSource};
use super::kernel::full_sample_estimates;
use super::terms::ScoreRule;
use super::Estimator;
use crate::contrast::EstimandSpec;
use crate::data::Dataset;
use crate::error::Result;
use crate::report::EstimateReport;

/// Cross-fitting settings for the `dml` estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrossFit {
    pub folds: usize,
    pub seed: u64,
}

/// Fits nuisances on the full sample (when a full-sample estimator is
/// requested) and runs every estimator for every estimand. Reports are
/// ordered by estimand, then by position in `estimators`.
pub fn run_estimators<S: BundleSource>(
    data: &Dataset,
    source: &S,
    estimands: &[EstimandSpec],
    estimators: &[Estimator],
    rule: ScoreRule,
    cross_fit: CrossFit,
) -> Result<Vec<EstimateReport>> {
    let full: Vec<Estimator> = estimators.iter().copied().filter(|e| *e != Estimator::Dml).collect();
    let full_reports = if full.is_empty() {
        Vec::new()
    } else {
        let all: Vec<usize> = (0..data.len()).collect();
        let bundle = source.fit(data, &all)?;
        full_sample_estimates(data, &bundle, estimands, &full, rule)?
    };
    let dml_reports = if estimators.contains(&Estimator::Dml) {
        dml_with_source(data, source, estimands, rule, cross_fit.folds, cross_fit.seed)?
    } else {
        Vec::new()
    };
    let mut full_iter = full_reports.into_iter();
    let mut dml_iter = dml_reports.into_iter();
    let mut out = Vec::with_capacity(estimands.len() * estimators.len());
    for _ in estimands {
        for e in estimators {
            let next = if *e == Estimator::Dml {
                dml_iter.next()
            } else {
                full_iter.next()
            };
            out.push(next.expect("one report per estimand and estimator"));
        }
    }
    Ok(out)
}
