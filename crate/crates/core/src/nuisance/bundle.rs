use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::registry::{CellData, FeatureMap, LearnerRegistry, LearnerSpec};
use super::scores::{predict_principal_scores, PrincipalScores};
use super::{pair_mean, rows_to_matrix, OutcomeModel, Predictive, ProbabilityModel};
use crate::contrast::ContrastFunction;
use crate::data::{Dataset, OutcomeKind, StratumId};
use crate::error::{Error, Result};

/// Numerical positivity guards. Propensities and intermediate
/// probabilities are clipped to `[epsilon, 1 - epsilon]`; `delta` floors
/// the complier score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Clipping {
    pub epsilon: f64,
    pub delta: f64,
}

impl Default for Clipping {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            delta: 0.0,
        }
    }
}

impl Clipping {
    pub const NONE: Clipping = Clipping {
        epsilon: 0.0,
        delta: 0.0,
    };

    fn clip(&self, p: f64, events: &mut u32) -> f64 {
        let lo = self.epsilon;
        let hi = 1.0 - self.epsilon;
        if p < lo {
            *events += 1;
            lo
        } else if p > hi {
            *events += 1;
            hi
        } else {
            p
        }
    }
}

/// Clipped propensity and intermediate probabilities at one covariate value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitPrediction {
    pub pi: f64,
    pub p0: f64,
    pub p1: f64,
    /// Number of the three values that were clipped.
    pub clipped: u32,
}

impl UnitPrediction {
    pub fn p(&self, z: u8) -> f64 {
        if z == 1 {
            self.p1
        } else {
            self.p0
        }
    }

    /// `P(Z = z | X)`.
    pub fn assignment(&self, z: u8) -> f64 {
        if z == 1 {
            self.pi
        } else {
            1.0 - self.pi
        }
    }
}

/// Unit-level outcome models indexed by observed cell `(z, d)`.
#[derive(Clone, Default)]
pub struct CellModels {
    models: [[Option<Arc<dyn OutcomeModel>>; 2]; 2],
}

impl fmt::Debug for CellModels {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells: Vec<(u8, u8)> = (0..2u8)
            .flat_map(|z| (0..2u8).map(move |d| (z, d)))
            .filter(|&(z, d)| self.get(z, d).is_some())
            .collect();
        f.debug_struct("CellModels").field("cells", &cells).finish()
    }
}

impl CellModels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, z: u8, d: u8, model: Arc<dyn OutcomeModel>) -> Self {
        self.insert(z, d, model);
        self
    }

    pub fn insert(&mut self, z: u8, d: u8, model: Arc<dyn OutcomeModel>) {
        self.models[z as usize][d as usize] = Some(model);
    }

    pub fn get(&self, z: u8, d: u8) -> Option<&Arc<dyn OutcomeModel>> {
        self.models[z as usize][d as usize].as_ref()
    }
}

/// Fitted nuisance functions. Without outcome models the bundle is the
/// reduced set used for the stratum-proportion denominators.
#[derive(Clone)]
pub struct NuisanceBundle {
    propensity: Arc<dyn ProbabilityModel>,
    intermediate: [Arc<dyn ProbabilityModel>; 2],
    outcome: Option<CellModels>,
    features: [FeatureMap; 3],
    clipping: Clipping,
    train_indices: Vec<usize>,
}

impl fmt::Debug for NuisanceBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NuisanceBundle")
            .field("propensity", &self.propensity)
            .field("intermediate", &self.intermediate)
            .field("outcome", &self.outcome)
            .field("features", &self.features)
            .field("clipping", &self.clipping)
            .field("n_train", &self.train_indices.len())
            .finish()
    }
}

impl NuisanceBundle {
    /// Assembles a bundle from known functions on raw covariates, e.g. the
    /// true data-generating functions. `p0` and `p1` model `P(D = 1 | Z = z, X)`.
    pub fn from_parts(
        propensity: Arc<dyn ProbabilityModel>,
        p0: Arc<dyn ProbabilityModel>,
        p1: Arc<dyn ProbabilityModel>,
        outcome: Option<CellModels>,
        clipping: Clipping,
    ) -> Self {
        Self {
            propensity,
            intermediate: [p0, p1],
            outcome,
            features: [FeatureMap::Raw; 3],
            clipping,
            train_indices: Vec::new(),
        }
    }

    pub fn with_train_indices(mut self, indices: Vec<usize>) -> Self {
        self.train_indices = indices;
        self
    }

    /// Rows the bundle was fitted on (empty for injected functions).
    pub fn train_indices(&self) -> &[usize] {
        &self.train_indices
    }

    pub fn clipping(&self) -> Clipping {
        self.clipping
    }

    pub fn has_outcome(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn predict_unit(&self, x: &[f64]) -> Result<UnitPrediction> {
        let xp = self.features[0].apply(x)?;
        let xi = if self.features[1] == self.features[0] {
            xp.clone()
        } else {
            self.features[1].apply(x)?
        };
        let mut clipped = 0;
        let pi = self.clipping.clip(self.propensity.predict(&xp), &mut clipped);
        let p0 = self.clipping.clip(self.intermediate[0].predict(&xi), &mut clipped);
        let p1 = self.clipping.clip(self.intermediate[1].predict(&xi), &mut clipped);
        Ok(UnitPrediction { pi, p0, p1, clipped })
    }

    pub fn principal_scores(&self, x: &[f64]) -> Result<PrincipalScores> {
        let u = self.predict_unit(x)?;
        Ok(predict_principal_scores(u.p1, u.p0, self.clipping.delta))
    }

    /// Predictive distribution of the outcome in cell `(z, d)` at `x`.
    pub fn outcome_profile(&self, z: u8, d: u8, x: &[f64]) -> Result<Predictive> {
        let cells = self.outcome.as_ref().ok_or(Error::MissingNuisance("outcome"))?;
        let m = cells.get(z, d).ok_or(Error::EmptyCell { z, d })?;
        Ok(m.predict(&self.features[2].apply(x)?))
    }

    /// Pairwise mean `mu_{z1 d1 z2 d2}(x1, x2)`.
    pub fn predict_mu(
        &self,
        h: &ContrastFunction,
        cell1: (u8, u8),
        x1: &[f64],
        cell2: (u8, u8),
        x2: &[f64],
    ) -> Result<Vec<f64>> {
        let a = self.outcome_profile(cell1.0, cell1.1, x1)?;
        let b = self.outcome_profile(cell2.0, cell2.1, x2)?;
        let mut out = vec![0.0; h.dim()];
        pair_mean(h, &a, &b, &mut out);
        Ok(out)
    }
}

/// Learner choice per nuisance component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuisanceSpec {
    pub propensity: LearnerSpec,
    pub intermediate: LearnerSpec,
    pub outcome: LearnerSpec,
    #[serde(default)]
    pub clipping: Clipping,
}

impl Default for NuisanceSpec {
    fn default() -> Self {
        Self::parametric()
    }
}

impl NuisanceSpec {
    /// Logistic propensity and intermediate models, Gaussian or
    /// proportional-odds outcome models, all on raw covariates.
    pub fn parametric() -> Self {
        Self::uniform("parametric")
    }

    pub fn uniform(kind: &str) -> Self {
        Self {
            propensity: LearnerSpec::new(kind),
            intermediate: LearnerSpec::new(kind),
            outcome: LearnerSpec::new(kind),
            clipping: Clipping::default(),
        }
    }

    /// Switches each component to transformed covariates when its flag is
    /// false (the component's model is then misspecified).
    pub fn with_correct(mut self, tp: bool, ps: bool, oc: bool) -> Self {
        let pick = |ok: bool| if ok { FeatureMap::Raw } else { FeatureMap::Transformed };
        self.propensity.features = pick(tp);
        self.intermediate.features = pick(ps);
        self.outcome.features = pick(oc);
        self
    }

    pub fn with_clipping(mut self, clipping: Clipping) -> Self {
        self.clipping = clipping;
        self
    }
}

/// Outcome cells `(z, d)` needed by the given strata, in a fixed order.
pub(crate) fn needed_cells(strata: &[StratumId]) -> Vec<(u8, u8)> {
    let mut cells: Vec<(u8, u8)> = strata
        .iter()
        .flat_map(|s| {
            let (d1, d2) = s.observed_cells();
            [(1, d1), (0, d2)]
        })
        .collect();
    cells.sort_unstable();
    cells.dedup();
    cells
}

/// Fits bundles on arbitrary training subsets of one dataset.
#[derive(Debug, Clone)]
pub struct NuisanceFitter {
    spec: NuisanceSpec,
    registry: Arc<LearnerRegistry>,
    cells: Vec<(u8, u8)>,
}

impl NuisanceFitter {
    pub fn new(spec: NuisanceSpec, strata: &[StratumId]) -> Self {
        Self::with_registry(spec, Arc::new(LearnerRegistry::default()), strata)
    }

    pub fn with_registry(spec: NuisanceSpec, registry: Arc<LearnerRegistry>, strata: &[StratumId]) -> Self {
        Self {
            spec,
            registry,
            cells: needed_cells(strata),
        }
    }

    pub fn spec(&self) -> &NuisanceSpec {
        &self.spec
    }

    /// Propensity and intermediate models only.
    pub fn fit_scores_only(&self, data: &Dataset, train: &[usize]) -> Result<NuisanceBundle> {
        self.fit_inner(data, train, false)
    }

    pub fn fit(&self, data: &Dataset, train: &[usize]) -> Result<NuisanceBundle> {
        self.fit_inner(data, train, true)
    }

    fn features(map: FeatureMap, data: &Dataset, rows: &[usize]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|&i| map.apply(&data.get(i).x)).collect()
    }

    fn fit_inner(&self, data: &Dataset, train: &[usize], with_outcome: bool) -> Result<NuisanceBundle> {
        let spec = &self.spec;
        let prop_learner = self.registry.binary(&spec.propensity)?;
        let int_learner = self.registry.binary(&spec.intermediate)?;
        let out_learner = if with_outcome {
            Some(self.registry.outcome(&spec.outcome)?)
        } else {
            None
        };
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }

        let xs = Self::features(spec.propensity.features, data, train)?;
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let z: Vec<f64> = train.iter().map(|&i| f64::from(data.get(i).z)).collect();
        let propensity = prop_learner.fit(&rows_to_matrix(&refs), &z)?;

        let mut intermediate = Vec::with_capacity(2);
        for arm in 0..2u8 {
            let rows: Vec<usize> = train.iter().copied().filter(|&i| data.get(i).z == arm).collect();
            if rows.is_empty() {
                return Err(Error::EmptyCell { z: arm, d: 0 });
            }
            let xs = Self::features(spec.intermediate.features, data, &rows)?;
            let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
            let d: Vec<f64> = rows.iter().map(|&i| f64::from(data.get(i).d)).collect();
            intermediate.push(int_learner.fit(&rows_to_matrix(&refs), &d)?);
        }
        let p1 = intermediate.pop().expect("two arms");
        let p0 = intermediate.pop().expect("two arms");

        let outcome = match out_learner {
            None => None,
            Some(learner) => {
                let mut cells = Vec::with_capacity(self.cells.len());
                for &(cz, cd) in &self.cells {
                    let rows: Vec<usize> = train
                        .iter()
                        .copied()
                        .filter(|&i| {
                            let o = data.get(i);
                            o.in_cell(cz, cd) && o.y.is_some()
                        })
                        .collect();
                    if rows.is_empty() {
                        return Err(Error::EmptyCell { z: cz, d: cd });
                    }
                    let xs = Self::features(spec.outcome.features, data, &rows)?;
                    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
                    cells.push(CellData {
                        z: cz,
                        d: cd,
                        x: rows_to_matrix(&refs),
                        y: rows.iter().map(|&i| data.get(i).y.expect("filtered")).collect(),
                    });
                }
                let kind: OutcomeKind = data.outcome_kind();
                let fitted = learner.fit_cells(&cells, kind)?;
                let mut models = CellModels::new();
                for (c, m) in cells.iter().zip(fitted) {
                    models.insert(c.z, c.d, m);
                }
                Some(models)
            }
        };

        Ok(NuisanceBundle {
            propensity,
            intermediate: [p0, p1],
            outcome,
            features: [
                spec.propensity.features,
                spec.intermediate.features,
                spec.outcome.features,
            ],
            clipping: spec.clipping,
            train_indices: train.to_vec(),
        })
    }
}

/// Fits every component on all rows of `train`, with outcome models for the
/// cells that `strata` need.
pub fn fit_nuisance_bundle(train: &Dataset, spec: &NuisanceSpec, strata: &[StratumId]) -> Result<NuisanceBundle> {
    let all: Vec<usize> = (0..train.len()).collect();
    NuisanceFitter::new(spec.clone(), strata).fit(train, &all)
}
