use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use pgce::contrast::Summary;
use pgce::inference::BootstrapResult;
use pgce::inference::OracleTruth;
use pgce::{ContrastFunction, Error, EstimateReport, Result};

pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

pub fn component_names(contrast: &ContrastFunction, summary: Summary) -> Vec<String> {
    let mut names = match contrast {
        ContrastFunction::WinPair => vec!["win".to_string(), "loss".to_string()],
        h if h.dim() == 1 => vec![h.name().to_string()],
        h => (0..h.dim()).map(|k| format!("{}_{k}", h.name())).collect(),
    };
    if summary != Summary::Raw {
        names.push(summary.as_str().to_string());
    }
    names
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub const REPORT_HEADER: [&str; 15] = [
    "estimator",
    "stratum",
    "contrast",
    "summary",
    "component",
    "estimate",
    "se",
    "ci_lo",
    "ci_hi",
    "numerator",
    "denominator",
    "n",
    "clip_events",
    "floored_units",
    "seed",
];

pub fn write_reports<W: Write>(
    reports: &[EstimateReport],
    contrast: &ContrastFunction,
    summary: Summary,
    w: W,
) -> Result<()> {
    let names = component_names(contrast, summary);
    let mut w = csv::Writer::from_writer(w);
    w.write_record(REPORT_HEADER)?;
    for r in reports {
        let boot = r.bootstrap.as_ref();
        for (c, name) in names.iter().enumerate() {
            let is_summary = c >= r.point.len();
            let (est, se, ci, numerator) = if is_summary {
                (
                    r.summary_value,
                    boot.and_then(|b| b.summary_se),
                    boot.and_then(|b| b.summary_ci),
                    None,
                )
            } else {
                (
                    r.point[c],
                    boot.map(|b| b.se[c]),
                    boot.map(|b| b.ci[c]),
                    Some(r.numerator[c]),
                )
            };
            w.write_record([
                r.meta.estimator.clone(),
                r.meta.stratum.to_string(),
                r.meta.contrast.clone(),
                r.meta.summary.as_str().to_string(),
                name.clone(),
                num(est),
                opt(se),
                opt(ci.map(|c| c.0)),
                opt(ci.map(|c| c.1)),
                opt(numerator),
                num(r.denominator),
                r.meta.n.to_string(),
                r.meta.clip_events.to_string(),
                r.meta.floored_units.to_string(),
                r.meta.seed.map(|s| s.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Long-format dump of bootstrap draws; failed replicates have an empty
/// estimate.
pub fn write_replicates<W: Write>(
    boot: &BootstrapResult,
    reports: &[EstimateReport],
    contrast: &ContrastFunction,
    summary: Summary,
    eta0: Option<f64>,
    w: &mut csv::Writer<W>,
) -> Result<()> {
    let names = component_names(contrast, summary);
    for (b, rep) in boot.replicates.iter().enumerate() {
        let mut k = 0;
        for r in reports {
            for name in &names {
                w.write_record([
                    b.to_string(),
                    r.meta.estimator.clone(),
                    r.meta.stratum.to_string(),
                    opt(eta0),
                    name.clone(),
                    rep.as_ref().map(|v| num(v[k])).unwrap_or_default(),
                ])?;
                k += 1;
            }
        }
    }
    Ok(())
}

pub const REPLICATE_HEADER: [&str; 6] = ["replicate", "estimator", "stratum", "eta0", "component", "estimate"];

pub fn write_sensitivity<W: Write>(rows: &[(f64, EstimateReport)], w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["stratum", "eta0", "estimate", "se", "ci_lo", "ci_hi"])?;
    for (eta0, r) in rows {
        let boot = r.bootstrap.as_ref();
        let (se, ci) = match boot {
            Some(b) if r.meta.summary != Summary::Raw => (b.summary_se, b.summary_ci),
            Some(b) => (Some(b.se[0]), Some(b.ci[0])),
            None => (None, None),
        };
        w.write_record([
            r.meta.stratum.to_string(),
            num(*eta0),
            num(r.summary_value),
            opt(se),
            opt(ci.map(|c| c.0)),
            opt(ci.map(|c| c.1)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_oracle<W: Write>(
    dgp: &str,
    stratum: &str,
    contrast: &ContrastFunction,
    summary: Summary,
    t: &OracleTruth,
    w: W,
) -> Result<()> {
    let names = component_names(contrast, summary);
    let mut w = csv::Writer::from_writer(w);
    w.write_record([
        "dgp",
        "stratum",
        "contrast",
        "component",
        "value",
        "se",
        "stratum_units",
        "draws",
    ])?;
    for (c, name) in names.iter().enumerate() {
        let (value, se) = if c < t.value.len() {
            (num(t.value[c]), num(t.se[c]))
        } else {
            (num(t.summary_value), String::new())
        };
        w.write_record([
            dgp.to_string(),
            stratum.to_string(),
            contrast.name().to_string(),
            name.clone(),
            value,
            se,
            t.stratum_units.to_string(),
            t.draws.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
