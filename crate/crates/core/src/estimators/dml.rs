//! Debiased machine learning with pair-block cross-fitting.

use rayon::prelude::*;

use super::kernel::{accumulate_pair, ordered_sum, reduce_pairs, Assembly, Targets};
use super::partition::{partition_pairs, PairPartition};
use super::terms::{predict_units, unit_terms, ScoreRule, UnitTerms};
use super::Estimator;
use crate::contrast::EstimandSpec;
use crate::data::{Dataset, Observation};
use crate::error::{Error, Result};
use crate::nuisance::{NuisanceBundle, NuisanceFitter};
use crate::report::EstimateReport;

/// Produces nuisance bundles trained on a subset of rows.
pub trait BundleSource: Sync {
    fn fit(&self, data: &Dataset, train: &[usize]) -> Result<NuisanceBundle>;

    /// Bundle without outcome models; defaults to a full fit.
    fn fit_scores_only(&self, data: &Dataset, train: &[usize]) -> Result<NuisanceBundle> {
        self.fit(data, train)
    }
}

impl BundleSource for NuisanceFitter {
    fn fit(&self, data: &Dataset, train: &[usize]) -> Result<NuisanceBundle> {
        NuisanceFitter::fit(self, data, train)
    }

    fn fit_scores_only(&self, data: &Dataset, train: &[usize]) -> Result<NuisanceBundle> {
        NuisanceFitter::fit_scores_only(self, data, train)
    }
}

/// Returns the same known functions for every training set, recording the
/// training rows it was asked for.
#[derive(Debug, Clone)]
pub struct FixedBundle(pub NuisanceBundle);

impl BundleSource for FixedBundle {
    fn fit(&self, _data: &Dataset, train: &[usize]) -> Result<NuisanceBundle> {
        Ok(self.0.clone().with_train_indices(train.to_vec()))
    }
}

struct BlockTerms {
    /// Global index -> local position in `terms` (usize::MAX if absent).
    local: Vec<usize>,
    terms: UnitTerms,
}

/// Cross-fitted triply robust estimator: each pair block uses nuisances
/// trained off its two folds and each unit's stratum-proportion score uses
/// nuisances trained off its own fold.
pub fn dml_estimate<S: BundleSource>(
    data: &Dataset,
    source: &S,
    estimands: &[EstimandSpec],
    k: usize,
    seed: u64,
) -> Result<Vec<EstimateReport>> {
    dml_with_source(data, source, estimands, ScoreRule::Monotone, k, seed)
}

pub(crate) fn dml_with_source<S: BundleSource>(
    data: &Dataset,
    source: &S,
    estimands: &[EstimandSpec],
    rule: ScoreRule,
    k: usize,
    seed: u64,
) -> Result<Vec<EstimateReport>> {
    let partition = partition_pairs(data.len(), k, seed)?;
    let mut reports = dml_with_partition(data, source, estimands, rule, &partition)?;
    for r in &mut reports {
        r.meta.seed = Some(seed);
    }
    Ok(reports)
}

pub fn dml_with_partition<S: BundleSource>(
    data: &Dataset,
    source: &S,
    estimands: &[EstimandSpec],
    rule: ScoreRule,
    partition: &PairPartition,
) -> Result<Vec<EstimateReport>> {
    let n = data.len();
    if partition.n() != n {
        return Err(Error::Config(format!(
            "partition covers {} units, data has {n}",
            partition.n()
        )));
    }
    // with two folds the cross block has no training rows
    if partition.k() < 3 {
        return Err(Error::BadK { n, k: partition.k() });
    }
    for spec in estimands {
        rule.check_stratum(spec.stratum)?;
    }
    let blocks: Vec<NuisanceBundle> = (0..partition.num_blocks())
        .into_par_iter()
        .map(|l| source.fit(data, &partition.block_train(l)))
        .collect::<Result<_>>()?;
    let fold_bundles: Vec<NuisanceBundle> = (0..partition.k())
        .into_par_iter()
        .map(|f| source.fit_scores_only(data, &partition.fold_train(f)))
        .collect::<Result<_>>()?;

    let obs: Vec<&Observation> = data.observations().iter().collect();
    let block_preds = blocks
        .iter()
        .enumerate()
        .map(|(l, b)| {
            let units = partition.block_units(l);
            let preds = predict_units(units.iter().map(|&i| obs[i]), b)?;
            Ok((units, preds))
        })
        .collect::<Result<Vec<_>>>()?;
    let fold_preds = fold_bundles
        .iter()
        .enumerate()
        .map(|(f, b)| predict_units(partition.folds()[f].iter().map(|&i| obs[i]), b))
        .collect::<Result<Vec<_>>>()?;

    let targets = Targets {
        tr: true,
        ..Default::default()
    };
    let mut out = Vec::with_capacity(estimands.len());
    for spec in estimands {
        let mut block_terms = Vec::with_capacity(blocks.len());
        for (b, (units, preds)) in blocks.iter().zip(&block_preds) {
            let unit_obs: Vec<&Observation> = units.iter().map(|&i| obs[i]).collect();
            let terms = unit_terms(&unit_obs, preds, b, spec.stratum, rule, true)?;
            let mut local = vec![usize::MAX; n];
            for (pos, &i) in units.iter().enumerate() {
                local[i] = pos;
            }
            block_terms.push(BlockTerms { local, terms });
        }

        let mut phi = vec![0.0; n];
        let (mut clip_events, mut floored) = (0, 0);
        for (f, (b, preds)) in fold_bundles.iter().zip(&fold_preds).enumerate() {
            let fold = &partition.folds()[f];
            let unit_obs: Vec<&Observation> = fold.iter().map(|&i| obs[i]).collect();
            let t = unit_terms(&unit_obs, preds, b, spec.stratum, rule, false)?;
            for (pos, &i) in fold.iter().enumerate() {
                phi[i] = t.phi[pos];
            }
            clip_events += t.clip_events;
            floored += t.floored;
        }

        let sums = reduce_pairs(n, |i, j, acc| {
            let bt = &block_terms[partition.block_of_pair(i, j)];
            accumulate_pair(&spec.contrast, targets, &bt.terms, bt.local[i], bt.local[j], acc);
        });
        let asm = Assembly {
            spec,
            n,
            phi_mean: ordered_sum(&phi) / n as f64,
            clip_events,
            floored,
            rule,
        };
        out.push(asm.report(Estimator::Dml, &sums.tr)?);
    }
    Ok(out)
}
