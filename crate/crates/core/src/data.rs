//! Observations, datasets and CSV ingestion.
//!
//! An outcome is either a real value (a category index for ordinal data) or
//! undefined. Undefined outcomes only occur with `d = 0`, the usual
//! truncation-by-death convention.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One unit's record.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub x: Vec<f64>,
    pub z: u8,
    pub d: u8,
    pub y: Option<f64>,
}

impl Observation {
    pub fn new(x: Vec<f64>, z: u8, d: u8, y: Option<f64>) -> Self {
        Self { x, z, d, y }
    }

    pub fn in_cell(&self, z: u8, d: u8) -> bool {
        self.z == z && self.d == d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeKind {
    Continuous,
    /// Integer categories `1..=levels`.
    Ordinal(usize),
}

impl OutcomeKind {
    pub fn levels(&self) -> Option<usize> {
        match self {
            OutcomeKind::Continuous => None,
            OutcomeKind::Ordinal(q) => Some(*q),
        }
    }
}

/// Principal stratum `{D(1), D(0)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StratumId {
    S10,
    S00,
    S11,
    S01,
}

impl StratumId {
    /// Strata identified under monotonicity.
    pub const MONOTONE: [StratumId; 3] = [StratumId::S10, StratumId::S00, StratumId::S11];
    pub const ALL: [StratumId; 4] = [StratumId::S10, StratumId::S01, StratumId::S00, StratumId::S11];

    pub fn from_potentials(d1: u8, d0: u8) -> Self {
        match (d1, d0) {
            (1, 0) => StratumId::S10,
            (0, 0) => StratumId::S00,
            (1, 1) => StratumId::S11,
            _ => StratumId::S01,
        }
    }

    /// Observed intermediate values `(d1, d2)` of the treated and control
    /// cells whose pairs carry this stratum's contrast.
    pub fn observed_cells(&self) -> (u8, u8) {
        match self {
            StratumId::S10 => (1, 0),
            StratumId::S11 => (1, 1),
            StratumId::S00 => (0, 0),
            StratumId::S01 => (0, 1),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            StratumId::S10 => "10",
            StratumId::S00 => "00",
            StratumId::S11 => "11",
            StratumId::S01 => "01",
        }
    }
}

impl fmt::Display for StratumId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StratumId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().trim_start_matches(['s', 'S']) {
            "10" => Ok(StratumId::S10),
            "00" => Ok(StratumId::S00),
            "11" => Ok(StratumId::S11),
            "01" => Ok(StratumId::S01),
            other => Err(Error::Parse(format!("unknown stratum `{other}`"))),
        }
    }
}

impl Serialize for StratumId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for StratumId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An immutable collection of observations sharing one covariate dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    observations: Vec<Observation>,
    outcome_kind: OutcomeKind,
}

impl Dataset {
    /// Builds a dataset without checking it; see [`validate_dataset`].
    pub fn new(observations: Vec<Observation>, outcome_kind: OutcomeKind) -> Self {
        Self {
            observations,
            outcome_kind,
        }
    }

    pub fn validated(observations: Vec<Observation>, outcome_kind: OutcomeKind) -> Result<Self> {
        validate_dataset(Self::new(observations, outcome_kind))
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn get(&self, i: usize) -> &Observation {
        &self.observations[i]
    }

    pub fn outcome_kind(&self) -> OutcomeKind {
        self.outcome_kind
    }

    pub fn dim(&self) -> usize {
        self.observations.first().map_or(0, |o| o.x.len())
    }

    /// Rows at `indices`, in that order (repeats allowed).
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            observations: indices.iter().map(|&i| self.observations[i].clone()).collect(),
            outcome_kind: self.outcome_kind,
        }
    }

    pub fn into_observations(self) -> Vec<Observation> {
        self.observations
    }
}

/// Returns the dataset unchanged if every row is well formed, otherwise the
/// first violation with its row index.
pub fn validate_dataset(data: Dataset) -> Result<Dataset> {
    if data.observations.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let p = data.observations[0].x.len();
    for (row, o) in data.observations.iter().enumerate() {
        if o.z > 1 {
            return Err(Error::InvalidBinary {
                row,
                field: "z",
                value: o.z as i64,
            });
        }
        if o.d > 1 {
            return Err(Error::InvalidBinary {
                row,
                field: "d",
                value: o.d as i64,
            });
        }
        if o.x.len() != p {
            return Err(Error::DimensionMismatch {
                row,
                expected: p,
                found: o.x.len(),
            });
        }
        match o.y {
            None if o.d == 1 => return Err(Error::UndefinedOutcomeWithD1 { row }),
            None => {}
            Some(y) if !y.is_finite() => return Err(Error::NonFiniteValue { row, value: y }),
            Some(y) => {
                if let OutcomeKind::Ordinal(q) = data.outcome_kind {
                    if y.fract() != 0.0 || y < 1.0 || y > q as f64 {
                        return Err(Error::InvalidCategory {
                            row,
                            value: y,
                            levels: q,
                        });
                    }
                }
            }
        }
        if let Some(&bad) = o.x.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { row, value: bad });
        }
    }
    Ok(data)
}

fn parse_binary(field: &'static str, raw: &str, row: usize) -> Result<u8> {
    let v: i64 = raw
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("row {row}: column `{field}` value `{raw}` is not an integer")))?;
    if !(0..=1).contains(&v) {
        return Err(Error::InvalidBinary { row, field, value: v });
    }
    Ok(v as u8)
}

/// Reads the ingestion schema: a header row with columns `x1..xp`, `z`, `d`
/// and `y`; a blank `y` cell is an undefined outcome. The result is validated.
pub fn read_csv<R: Read>(reader: R, outcome_kind: OutcomeKind) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let z_col = find("z").ok_or_else(|| Error::Parse("missing `z` column".into()))?;
    let d_col = find("d").ok_or_else(|| Error::Parse("missing `d` column".into()))?;
    let y_col = find("y").ok_or_else(|| Error::Parse("missing `y` column".into()))?;

    let mut x_cols: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(col, h)| {
            h.strip_prefix('x')
                .and_then(|k| k.parse::<usize>().ok())
                .map(|k| (k, col))
        })
        .collect();
    x_cols.sort_unstable();
    for (expected, (k, _)) in (1..).zip(&x_cols) {
        if *k != expected {
            return Err(Error::Parse(format!(
                "covariate columns must be x1..xp, found gap at x{expected}"
            )));
        }
    }

    let mut observations = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |col: usize| rec.get(col).unwrap_or("");
        let x = x_cols
            .iter()
            .map(|&(k, col)| {
                field(col)
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {row}: x{k} = `{}` is not a number", field(col))))
            })
            .collect::<Result<Vec<_>>>()?;
        let z = parse_binary("z", field(z_col), row)?;
        let d = parse_binary("d", field(d_col), row)?;
        let raw_y = field(y_col);
        let y = if raw_y.is_empty() {
            None
        } else {
            Some(
                raw_y
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {row}: y = `{raw_y}` is not a number")))?,
            )
        };
        observations.push(Observation { x, z, d, y });
    }
    validate_dataset(Dataset::new(observations, outcome_kind))
}

pub fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=data.dim()).map(|k| format!("x{k}")).collect();
    header.extend(["z", "d", "y"].map(String::from));
    w.write_record(&header)?;
    for o in data.observations() {
        let mut rec: Vec<String> = o.x.iter().map(|v| format!("{v}")).collect();
        rec.push(o.z.to_string());
        rec.push(o.d.to_string());
        rec.push(o.y.map(|y| format!("{y}")).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(z: u8, d: u8, y: Option<f64>) -> Observation {
        Observation::new(vec![0.5, -1.0], z, d, y)
    }

    #[test]
    fn valid_dataset_passes_through() {
        let obs = vec![
            row(1, 1, Some(2.0)),
            row(0, 0, Some(1.0)),
            row(1, 0, None),
            row(0, 1, Some(3.0)),
        ];
        let data = Dataset::new(obs, OutcomeKind::Continuous);
        assert_eq!(validate_dataset(data.clone()).unwrap(), data);
    }

    #[test]
    fn rejects_non_binary_assignment() {
        let obs = vec![row(1, 1, Some(2.0)), row(2, 0, Some(1.0))];
        let err = validate_dataset(Dataset::new(obs, OutcomeKind::Continuous)).unwrap_err();
        assert_eq!(
            err,
            Error::InvalidBinary {
                row: 1,
                field: "z",
                value: 2
            }
        );
    }

    #[test]
    fn rejects_undefined_outcome_with_d1() {
        let obs = vec![row(1, 0, None), row(1, 1, None)];
        let err = validate_dataset(Dataset::new(obs, OutcomeKind::Continuous)).unwrap_err();
        assert_eq!(err, Error::UndefinedOutcomeWithD1 { row: 1 });
    }

    #[test]
    fn rejects_ragged_and_empty() {
        let obs = vec![row(1, 0, Some(1.0)), Observation::new(vec![1.0], 0, 0, Some(0.0))];
        assert!(matches!(
            validate_dataset(Dataset::new(obs, OutcomeKind::Continuous)),
            Err(Error::DimensionMismatch {
                row: 1,
                expected: 2,
                found: 1
            })
        ));
        assert_eq!(
            validate_dataset(Dataset::new(vec![], OutcomeKind::Continuous)),
            Err(Error::EmptyDataset)
        );
    }

    #[test]
    fn ordinal_categories_checked() {
        let obs = vec![row(1, 1, Some(3.0)), row(0, 0, Some(4.0))];
        assert!(matches!(
            validate_dataset(Dataset::new(obs, OutcomeKind::Ordinal(3))),
            Err(Error::InvalidCategory { row: 1, .. })
        ));
    }

    #[test]
    fn csv_blank_y_is_undefined() {
        let text = "x1,x2,z,d,y\n0.1,0.2,1,1,3.5\n0.3,0.4,0,0,\n";
        let data = read_csv(text.as_bytes(), OutcomeKind::Continuous).unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data.get(0).y, Some(3.5));
        assert_eq!(data.get(1).y, None);
        assert_eq!(data.get(1).x, vec![0.3, 0.4]);
    }

    #[test]
    fn csv_missing_y_column_is_parse_error() {
        let text = "x1,z,d\n0.1,1,1\n";
        assert!(matches!(
            read_csv(text.as_bytes(), OutcomeKind::Continuous),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let obs = vec![row(1, 1, Some(2.25)), row(0, 0, None)];
        let data = Dataset::validated(obs, OutcomeKind::Continuous).unwrap();
        let mut buf = Vec::new();
        write_csv(&data, &mut buf).unwrap();
        assert_eq!(read_csv(buf.as_slice(), OutcomeKind::Continuous).unwrap(), data);
    }

    #[test]
    fn stratum_parsing() {
        assert_eq!("10".parse::<StratumId>().unwrap(), StratumId::S10);
        assert_eq!("S01".parse::<StratumId>().unwrap(), StratumId::S01);
        assert!("12".parse::<StratumId>().is_err());
        assert_eq!(StratumId::from_potentials(1, 0), StratumId::S10);
        assert_eq!(StratumId::from_potentials(0, 1), StratumId::S01);
    }
}
