//! End-to-end runs driven by a [`RunConfig`].

use crate::config::RunConfig;
use crate::contrast::Summary;
use crate::data::Dataset;
use crate::error::Result;
use crate::estimators::Estimator;
use crate::estimators::{run_estimators, CrossFit, ScoreRule};
use crate::inference::{bootstrap_ci, BootstrapResult};
use crate::nuisance::NuisanceFitter;
use crate::report::{BootstrapSummary, EstimateReport};
use crate::sensitivity::{SensitivityEstimator, SensitivityFunction};

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub reports: Vec<EstimateReport>,
    /// Raw bootstrap draws, flattened per replicate in report order (point
    /// components, then the summary when it is not raw).
    pub bootstrap: Option<BootstrapResult>,
}

fn flatten(reports: &[EstimateReport], summary: Summary) -> Vec<f64> {
    let mut v = Vec::new();
    for r in reports {
        v.extend_from_slice(&r.point);
        if summary != Summary::Raw {
            v.push(r.summary_value);
        }
    }
    v
}

fn run_once(
    data: &Dataset,
    cfg: &RunConfig,
    estimators: &[Estimator],
    rule: ScoreRule,
    seed: u64,
) -> Result<Vec<EstimateReport>> {
    let fitter = NuisanceFitter::new(cfg.nuisance(), &cfg.strata);
    let cf = CrossFit { folds: cfg.folds, seed };
    run_estimators(data, &fitter, &cfg.estimands()?, estimators, rule, cf)
}

fn with_bootstrap(
    data: &Dataset,
    cfg: &RunConfig,
    estimators: &[Estimator],
    rule: ScoreRule,
    mut reports: Vec<EstimateReport>,
) -> Result<RunOutput> {
    if !cfg.bootstrap.enabled {
        return Ok(RunOutput {
            reports,
            bootstrap: None,
        });
    }
    let b = &cfg.bootstrap;
    let boot = bootstrap_ci(
        data,
        |d, rep_seed| {
            let seed = if b.rerandomize_folds { rep_seed } else { cfg.seed };
            Ok(flatten(&run_once(d, cfg, estimators, rule, seed)?, cfg.summary))
        },
        b.replicates,
        b.level,
        cfg.seed,
    )?;
    let mut offset = 0;
    for r in &mut reports {
        let dim = r.point.len();
        let (summary_se, summary_ci) = if cfg.summary != Summary::Raw {
            (Some(boot.se[offset + dim]), Some(boot.ci[offset + dim]))
        } else {
            (None, None)
        };
        r.bootstrap = Some(BootstrapSummary {
            replicates: b.replicates,
            failed: boot.failed,
            level: b.level,
            se: boot.se[offset..offset + dim].to_vec(),
            ci: boot.ci[offset..offset + dim].to_vec(),
            summary_se,
            summary_ci,
        });
        offset += dim + usize::from(cfg.summary != Summary::Raw);
    }
    Ok(RunOutput {
        reports,
        bootstrap: Some(boot),
    })
}

/// Validates nothing beyond the config; `data` should come from
/// [`read_csv`](crate::data::read_csv) or [`validate_dataset`](crate::data::validate_dataset).
pub fn run_estimate(data: &Dataset, cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let rule = ScoreRule::Monotone;
    let reports = run_once(data, cfg, &cfg.estimators, rule, cfg.seed)?;
    with_bootstrap(data, cfg, &cfg.estimators, rule, reports)
}

/// One run per `eta0` in the grid; reports are ordered by `eta0`, then
/// stratum.
pub fn run_sensitivity(data: &Dataset, cfg: &RunConfig) -> Result<Vec<RunOutput>> {
    cfg.validate()?;
    let estimator = match cfg.sensitivity.estimator {
        SensitivityEstimator::Tr => Estimator::Tr,
        SensitivityEstimator::Dml => Estimator::Dml,
    };
    cfg.sensitivity
        .eta0
        .iter()
        .map(|&eta0| {
            let rule = ScoreRule::Sensitivity(SensitivityFunction {
                form: cfg.sensitivity.form,
                eta0,
            });
            let reports = run_once(data, cfg, &[estimator], rule, cfg.seed)?;
            with_bootstrap(data, cfg, &[estimator], rule, reports)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::StratumId;
    use crate::simulation::gen_dgp_gaussian;

    #[test]
    fn bootstrap_is_attached_per_report() {
        let sim = gen_dgp_gaussian(150, 3, 0.0).unwrap();
        let cfg = RunConfig::from_json(
            r#"{"estimators": ["m3", "tr"], "strata": ["10", "11"], "bootstrap": {"enabled": true, "replicates": 20}}"#,
        )
        .unwrap();
        let out = run_estimate(&sim.data, &cfg).unwrap();
        assert_eq!(out.reports.len(), 4);
        assert_eq!(out.bootstrap.as_ref().unwrap().se.len(), 4);
        for r in &out.reports {
            let b = r.bootstrap.as_ref().unwrap();
            assert_eq!(b.replicates, 20);
            assert!(b.se[0] > 0.0 && b.ci[0].0 <= b.ci[0].1);
        }
        assert_eq!(out, run_estimate(&sim.data, &cfg).unwrap());
    }

    #[test]
    fn sensitivity_at_zero_matches_monotone() {
        let sim = gen_dgp_gaussian(300, 8, 0.0).unwrap();
        let cfg = RunConfig::from_json(r#"{"sensitivity": {"eta0": [0.0, 0.2]}}"#).unwrap();
        let mono = run_estimate(&sim.data, &cfg).unwrap().reports;
        let sens = run_sensitivity(&sim.data, &cfg).unwrap();
        assert_eq!(sens.len(), 2);
        for (a, b) in mono.iter().zip(&sens[0].reports) {
            assert_eq!(a.meta.stratum, b.meta.stratum);
            assert!(
                (a.point[0] - b.point[0]).abs() < 1e-12,
                "{} vs {}",
                a.point[0],
                b.point[0]
            );
        }
        assert_eq!(sens[1].reports[0].meta.eta0, Some(0.2));
        assert_eq!(sens[1].reports[0].meta.stratum, StratumId::S10);
    }
}
