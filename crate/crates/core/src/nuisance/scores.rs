use crate::data::StratumId;

/// Principal scores under monotonicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalScores {
    pub e10: f64,
    pub e00: f64,
    pub e11: f64,
    /// `(p1 - p0, 1 - p1, p0)` before flooring.
    pub raw: (f64, f64, f64),
    /// Set when `e10` hit the floor and the triple was renormalized.
    pub floored: bool,
}

impl PrincipalScores {
    pub fn get(&self, s: StratumId) -> f64 {
        match s {
            StratumId::S10 => self.e10,
            StratumId::S00 => self.e00,
            StratumId::S11 => self.e11,
            StratumId::S01 => 0.0,
        }
    }
}

/// `e10 = p1 - p0`, `e00 = 1 - p1`, `e11 = p0`, with `e10` floored at
/// `delta`. When the floor binds the triple is rescaled to sum to one.
pub fn predict_principal_scores(p1: f64, p0: f64, delta: f64) -> PrincipalScores {
    let raw = (p1 - p0, 1.0 - p1, p0);
    if raw.0 >= delta {
        return PrincipalScores {
            e10: raw.0,
            e00: raw.1,
            e11: raw.2,
            raw,
            floored: false,
        };
    }
    let e10 = delta;
    let total = e10 + raw.1 + raw.2;
    PrincipalScores {
        e10: e10 / total,
        e00: raw.1 / total,
        e11: raw.2 / total,
        raw,
        floored: true,
    }
}
