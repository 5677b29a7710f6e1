//! Pair kernels and the fixed-order U-statistic reduction shared by the
//! plug-in, triply robust and cross-fitted estimators.

use rayon::prelude::*;

use super::terms::{predict_units, unit_terms, ScoreRule, UnitTerms};
use super::{Estimator, PluginMode};
use crate::contrast::{summarize, ContrastFunction, EstimandSpec, MAX_DIM};
use crate::data::{Dataset, Observation};
use crate::error::{Error, Result};
use crate::nuisance::{pair_mean, NuisanceBundle};
use crate::report::{EstimateReport, ReportMeta};

pub(crate) const DENOMINATOR_GUARD: f64 = 1e-6;

/// Which pair sums to accumulate in one pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct Targets {
    pub tr: bool,
    pub pi_p: bool,
    pub pi_mu: bool,
    pub p_mu: bool,
}

impl Targets {
    pub fn from_estimators(list: &[Estimator]) -> Self {
        let mut t = Self::default();
        for e in list {
            match e {
                Estimator::M1 => t.pi_p = true,
                Estimator::M2 => t.pi_mu = true,
                Estimator::M3 => t.p_mu = true,
                Estimator::Tr | Estimator::Dml => t.tr = true,
            }
        }
        t
    }

    pub fn needs_mu(&self) -> bool {
        self.tr || self.pi_mu || self.p_mu
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct PairSums {
    pub tr: [f64; MAX_DIM],
    pub pi_p: [f64; MAX_DIM],
    pub pi_mu: [f64; MAX_DIM],
    pub p_mu: [f64; MAX_DIM],
}

impl PairSums {
    fn add(&mut self, o: &PairSums) {
        for k in 0..MAX_DIM {
            self.tr[k] += o.tr[k];
            self.pi_p[k] += o.pi_p[k];
            self.pi_mu[k] += o.pi_mu[k];
            self.p_mu[k] += o.p_mu[k];
        }
    }

    pub fn get(&self, e: Estimator) -> &[f64; MAX_DIM] {
        match e {
            Estimator::M1 => &self.pi_p,
            Estimator::M2 => &self.pi_mu,
            Estimator::M3 => &self.p_mu,
            Estimator::Tr | Estimator::Dml => &self.tr,
        }
    }
}

/// Adds the kernels of the unordered pair `{i, j}` (local positions in `t`).
#[inline(always)]
pub(crate) fn accumulate_pair(
    h: &ContrastFunction,
    tg: Targets,
    t: &UnitTerms,
    i: usize,
    j: usize,
    acc: &mut PairSums,
) {
    let dim = h.dim();
    let mut mu_ij = [0.0; MAX_DIM];
    let mut mu_ji = [0.0; MAX_DIM];
    if tg.needs_mu() {
        pair_mean(h, &t.prof1[i], &t.prof0[j], &mut mu_ij);
        pair_mean(h, &t.prof1[j], &t.prof0[i], &mut mu_ji);
    }
    // the outcome is read only when its pair weight is nonzero
    let a = t.w1[i] * t.w0[j];
    let b = t.w1[j] * t.w0[i];
    let mut h_ij = [0.0; MAX_DIM];
    let mut h_ji = [0.0; MAX_DIM];
    if a != 0.0 {
        h.eval_into(t.y[i], t.y[j], &mut h_ij);
    }
    if b != 0.0 {
        h.eval_into(t.y[j], t.y[i], &mut h_ji);
    }
    let pp = t.phi[i] * t.phi[j];
    let bb = t.b[i] * t.b[j];
    let ee = t.e[i] * t.e[j];
    for k in 0..dim {
        let mu = mu_ij[k] + mu_ji[k];
        if tg.tr {
            acc.tr[k] += 0.5 * (a * (h_ij[k] - mu_ij[k]) + b * (h_ji[k] - mu_ji[k]) + pp * mu);
        }
        if tg.pi_p {
            acc.pi_p[k] += 0.5 * (a * h_ij[k] + b * h_ji[k]);
        }
        if tg.pi_mu {
            acc.pi_mu[k] += 0.5 * (bb * mu);
        }
        if tg.p_mu {
            acc.p_mu[k] += 0.5 * (ee * mu);
        }
    }
}

/// Sum over all pairs `i < j` of `0..n`: each row `i` accumulates its
/// `j > i` terms in increasing `j`, rows are evaluated in parallel and then
/// added in increasing `i`. The result does not depend on the thread count.
pub(crate) fn reduce_pairs<F>(n: usize, pair: F) -> PairSums
where
    F: Fn(usize, usize, &mut PairSums) + Sync,
{
    let rows: Vec<PairSums> = (0..n)
        .into_par_iter()
        .with_min_len(8)
        .map(|i| {
            let mut acc = PairSums::default();
            for j in i + 1..n {
                pair(i, j, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = PairSums::default();
    for r in &rows {
        total.add(r);
    }
    total
}

pub(crate) fn n_pairs(n: usize) -> f64 {
    (n as f64) * (n as f64 - 1.0) / 2.0
}

pub(crate) fn ordered_sum(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |a, b| a + b)
}

pub(crate) struct Assembly<'a> {
    pub spec: &'a EstimandSpec,
    pub n: usize,
    pub phi_mean: f64,
    pub clip_events: u64,
    pub floored: u64,
    pub rule: ScoreRule,
}

impl Assembly<'_> {
    pub fn report(&self, estimator: Estimator, sums: &[f64; MAX_DIM]) -> Result<EstimateReport> {
        if !(self.phi_mean.abs() >= DENOMINATOR_GUARD) {
            return Err(Error::DenominatorNearZero(self.phi_mean));
        }
        let dim = self.spec.contrast.dim();
        let denominator = self.phi_mean * self.phi_mean;
        let pairs = n_pairs(self.n);
        let numerator: Vec<f64> = sums[..dim].iter().map(|s| s / pairs).collect();
        let point: Vec<f64> = numerator.iter().map(|v| v / denominator).collect();
        let summary_value = summarize(self.spec.summary, &point)?;
        Ok(EstimateReport {
            point,
            summary_value,
            numerator,
            denominator,
            bootstrap: None,
            meta: ReportMeta {
                stratum: self.spec.stratum,
                estimator: estimator.label().to_string(),
                contrast: self.spec.contrast.name().to_string(),
                summary: self.spec.summary,
                n: self.n,
                seed: None,
                clip_events: self.clip_events,
                floored_units: self.floored,
                eta0: self.rule.eta0(),
            },
        })
    }
}

/// Plug-in and triply robust estimates for each estimand from one bundle
/// fitted on the full data, sharing a single pass over the pairs per
/// estimand. `estimators` may contain `M1`, `M2`, `M3` and `Tr`; reports
/// are ordered by estimand, then estimator.
pub(crate) fn full_sample_estimates(
    data: &Dataset,
    bundle: &NuisanceBundle,
    estimands: &[EstimandSpec],
    estimators: &[Estimator],
    rule: ScoreRule,
) -> Result<Vec<EstimateReport>> {
    if data.len() < 2 {
        return Err(Error::TooFewRows {
            needed: 2,
            found: data.len(),
        });
    }
    if estimators.contains(&Estimator::Dml) {
        return Err(Error::Config(
            "the cross-fitted estimator needs a nuisance fitter".into(),
        ));
    }
    let obs: Vec<&Observation> = data.observations().iter().collect();
    let preds = predict_units(obs.iter().copied(), bundle)?;
    let targets = Targets::from_estimators(estimators);
    let mut out = Vec::with_capacity(estimands.len() * estimators.len());
    for spec in estimands {
        let t = unit_terms(&obs, &preds, bundle, spec.stratum, rule, targets.needs_mu())?;
        let sums = reduce_pairs(obs.len(), |i, j, acc| {
            accumulate_pair(&spec.contrast, targets, &t, i, j, acc)
        });
        let asm = Assembly {
            spec,
            n: obs.len(),
            phi_mean: ordered_sum(&t.phi) / obs.len() as f64,
            clip_events: t.clip_events,
            floored: t.floored,
            rule,
        };
        for &e in estimators {
            out.push(asm.report(e, sums.get(e))?);
        }
    }
    Ok(out)
}

/// Estimand, nuisances and score rule for kernel evaluation.
#[derive(Debug, Clone)]
pub struct KernelContext<'a> {
    pub estimand: EstimandSpec,
    pub bundle: &'a NuisanceBundle,
    pub rule: ScoreRule,
}

impl<'a> KernelContext<'a> {
    /// Monotonicity context; the 01 stratum is rejected.
    pub fn new(estimand: EstimandSpec, bundle: &'a NuisanceBundle) -> Result<Self> {
        ScoreRule::Monotone.check_stratum(estimand.stratum)?;
        Ok(Self {
            estimand,
            bundle,
            rule: ScoreRule::Monotone,
        })
    }

    pub fn with_rule(estimand: EstimandSpec, bundle: &'a NuisanceBundle, rule: ScoreRule) -> Result<Self> {
        rule.check_stratum(estimand.stratum)?;
        Ok(Self { estimand, bundle, rule })
    }
}

/// The symmetric efficient-influence pair kernel `g(O_i, O_j)`.
pub fn kernel_g(oi: &Observation, oj: &Observation, ctx: &KernelContext<'_>) -> Result<Vec<f64>> {
    let obs = [oi, oj];
    let preds = predict_units(obs.iter().copied(), ctx.bundle)?;
    let t = unit_terms(&obs, &preds, ctx.bundle, ctx.estimand.stratum, ctx.rule, true)?;
    let targets = Targets {
        tr: true,
        ..Default::default()
    };
    let mut acc = PairSums::default();
    accumulate_pair(&ctx.estimand.contrast, targets, &t, 0, 1, &mut acc);
    Ok(acc.tr[..ctx.estimand.contrast.dim()].to_vec())
}

/// Plug-in U-statistic estimator.
pub fn plugin_estimate(data: &Dataset, ctx: &KernelContext<'_>, mode: PluginMode) -> Result<EstimateReport> {
    let e = mode.estimator();
    let mut r = full_sample_estimates(data, ctx.bundle, std::slice::from_ref(&ctx.estimand), &[e], ctx.rule)?;
    Ok(r.remove(0))
}

/// Triply robust estimator: `U_n g / (E_n phi)^2`.
pub fn tr_estimate(data: &Dataset, ctx: &KernelContext<'_>) -> Result<EstimateReport> {
    let mut r = full_sample_estimates(
        data,
        ctx.bundle,
        std::slice::from_ref(&ctx.estimand),
        &[Estimator::Tr],
        ctx.rule,
    )?;
    Ok(r.remove(0))
}

/// All requested full-sample estimators under monotonicity.
pub fn estimate_all(
    data: &Dataset,
    bundle: &NuisanceBundle,
    estimands: &[EstimandSpec],
    estimators: &[Estimator],
) -> Result<Vec<EstimateReport>> {
    full_sample_estimates(data, bundle, estimands, estimators, ScoreRule::Monotone)
}

pub(crate) fn tr_with_rule(
    data: &Dataset,
    bundle: &NuisanceBundle,
    estimands: &[EstimandSpec],
    rule: ScoreRule,
) -> Result<Vec<EstimateReport>> {
    full_sample_estimates(data, bundle, estimands, &[Estimator::Tr], rule)
}
