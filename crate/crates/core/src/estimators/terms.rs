//! Unit-level ingredients of the pair kernels.

use crate::data::{Dataset, Observation, StratumId};
use crate::error::{Error, Result};
use crate::nuisance::{predict_principal_scores, NuisanceBundle, Predictive, UnitPrediction};
use crate::sensitivity::{eta_feasible_bound, eta_principal_scores, score_coefficients, SensitivityFunction};

/// How principal scores are obtained from `p1`, `p0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoreRule {
    /// Monotonicity, with the bundle's complier floor.
    Monotone,
    /// Sensitivity function `eta(X)`; allows the 01 stratum.
    Sensitivity(SensitivityFunction),
}

impl ScoreRule {
    pub(crate) fn check_stratum(&self, s: StratumId) -> Result<()> {
        match (self, s) {
            (ScoreRule::Monotone, StratumId::S01) => Err(Error::StratumRequiresSensitivity(s)),
            _ => Ok(()),
        }
    }

    pub(crate) fn eta0(&self) -> Option<f64> {
        match self {
            ScoreRule::Monotone => None,
            ScoreRule::Sensitivity(f) => Some(f.eta0),
        }
    }
}

/// `1(Z = z){D - p_z(X)} / P(Z = z | X) + p_z(X)`.
pub fn psi_dz(o: &Observation, u: &UnitPrediction, z: u8) -> f64 {
    let pz = u.p(z);
    if o.z == z {
        (f64::from(o.d) - pz) / u.assignment(z) + pz
    } else {
        pz
    }
}

/// Doubly robust `p_z`: the sample mean of [`psi_dz`].
pub fn estimate_pz_dr(data: &Dataset, bundle: &NuisanceBundle, z: u8) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut sum = 0.0;
    for o in data.observations() {
        sum += psi_dz(o, &bundle.predict_unit(&o.x)?, z);
    }
    Ok(sum / data.len() as f64)
}

pub(crate) fn predict_units<'a, I>(obs: I, bundle: &NuisanceBundle) -> Result<Vec<UnitPrediction>>
where
    I: IntoIterator<Item = &'a Observation>,
{
    obs.into_iter().map(|o| bundle.predict_unit(&o.x)).collect()
}

/// Per-unit quantities for one stratum, indexed by local position.
#[derive(Debug, Clone, Default)]
pub(crate) struct UnitTerms {
    /// Residual weight as the treated member of a pair.
    pub w1: Vec<f64>,
    /// Residual weight as the control member.
    pub w0: Vec<f64>,
    /// Doubly robust score for the stratum proportion.
    pub phi: Vec<f64>,
    /// Inverse-probability-weighted stratum indicator (no outcome or
    /// intermediate model).
    pub b: Vec<f64>,
    /// Model-based principal score.
    pub e: Vec<f64>,
    /// Outcome, or 0 where both weights vanish and the outcome is unused.
    pub y: Vec<f64>,
    pub prof1: Vec<Predictive>,
    pub prof0: Vec<Predictive>,
    pub clip_events: u64,
    pub floored: u64,
}

pub(crate) fn unit_terms(
    obs: &[&Observation],
    preds: &[UnitPrediction],
    bundle: &NuisanceBundle,
    s: StratumId,
    rule: ScoreRule,
    need_mu: bool,
) -> Result<UnitTerms> {
    rule.check_stratum(s)?;
    let n = obs.len();
    let (d1, d2) = s.observed_cells();
    let mut t = UnitTerms {
        w1: Vec::with_capacity(n),
        w0: Vec::with_capacity(n),
        phi: Vec::with_capacity(n),
        b: Vec::with_capacity(n),
        e: Vec::with_capacity(n),
        y: Vec::with_capacity(n),
        ..Default::default()
    };
    let delta = bundle.clipping().delta;
    let (mut infeasible, mut min_bound) = (0usize, f64::INFINITY);
    for (o, u) in obs.iter().zip(preds) {
        t.clip_events += u64::from(u.clipped);
        let (e, (c0, c1, c2)) = match rule {
            ScoreRule::Monotone => {
                let ps = predict_principal_scores(u.p1, u.p0, delta);
                t.floored += u64::from(ps.floored);
                (ps.get(s), score_coefficients(s, 0.0))
            }
            ScoreRule::Sensitivity(f) => {
                let eta = f.eta(u.p1, u.p0);
                if (eta - 1.0).abs() < 1e-12 {
                    return Err(Error::EtaIsOne);
                }
                if u.p1 - u.p0 < delta.max(0.0) {
                    // crossing probabilities: floor the complier score as in
                    // the monotone path, with e01 = eta e10, and renormalize
                    let ps = predict_principal_scores(u.p1, u.p0, delta);
                    t.floored += 1;
                    let total = 1.0 + eta * ps.e10;
                    let e = match s {
                        StratumId::S01 => eta * ps.e10,
                        _ => ps.get(s),
                    };
                    (e / total, score_coefficients(s, eta))
                } else {
                    match eta_principal_scores(u.p1, u.p0, eta) {
                        Ok(es) => (es.get(s), score_coefficients(s, eta)),
                        Err(Error::EtaIsOne) => return Err(Error::EtaIsOne),
                        Err(_) => {
                            infeasible += 1;
                            min_bound = min_bound.min(eta_feasible_bound(u.p1, u.p0));
                            (0.0, (0.0, 0.0, 0.0))
                        }
                    }
                }
            }
        };
        let pd1 = if d1 == 1 { u.p1 } else { 1.0 - u.p1 };
        let pd2 = if d2 == 1 { u.p0 } else { 1.0 - u.p0 };
        let w1 = if o.z == 1 && o.d == d1 { e / (u.pi * pd1) } else { 0.0 };
        let w0 = if o.z == 0 && o.d == d2 {
            e / ((1.0 - u.pi) * pd2)
        } else {
            0.0
        };
        let y = match o.y {
            Some(y) => y,
            None if w1 == 0.0 && w0 == 0.0 => 0.0,
            None => return Err(Error::UndefinedOutcome),
        };
        let psi1 = psi_dz(o, u, 1);
        let psi0 = psi_dz(o, u, 0);
        let zf = f64::from(o.z);
        let df = f64::from(o.d);
        let b = c0 * zf / u.pi + c1 * zf * df / u.pi + c2 * (1.0 - zf) * df / (1.0 - u.pi);
        t.w1.push(w1);
        t.w0.push(w0);
        t.phi.push(c0 + c1 * psi1 + c2 * psi0);
        t.b.push(b);
        t.e.push(e);
        t.y.push(y);
        if need_mu {
            t.prof1.push(bundle.outcome_profile(1, d1, &o.x)?);
            t.prof0.push(bundle.outcome_profile(0, d2, &o.x)?);
        }
    }
    if infeasible > 0 {
        let eta0 = rule.eta0().unwrap_or(0.0);
        return Err(Error::EtaInfeasibleAtSomeX {
            eta0,
            count: infeasible,
            n,
            min_bound,
        });
    }
    Ok(t)
}
