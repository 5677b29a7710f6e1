use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use pgce::contrast::Summary;
use pgce::inference::mc_oracle_truth;
use pgce::sensitivity::SensitivityEstimator;
use pgce::simulation::{run_scenario, write_aggregates, write_replications, Correctness, ScenarioSpec};
use pgce::{
    read_csv, run_estimate, run_sensitivity, ContrastFunction, Dataset, DgpKind, DgpSpec, Error, EstimandSpec,
    Estimator, LearnerSpec, OutcomeKind, Result, RunConfig, StratumId,
};

use crate::output::{self, sink};
use crate::{EstimateArgs, OracleArgs, RunArgs, SensitivityArgs, SimulateArgs};

fn parse_outcome_kind(s: &str) -> Result<OutcomeKind> {
    match s.trim() {
        "continuous" => Ok(OutcomeKind::Continuous),
        other => other
            .strip_prefix("ordinal:")
            .and_then(|q| q.parse().ok())
            .map(OutcomeKind::Ordinal)
            .ok_or_else(|| {
                Error::Config(format!(
                    "outcome kind must be `continuous` or `ordinal:Q`, got `{other}`"
                ))
            }),
    }
}

fn parse_list<T: std::str::FromStr<Err = Error>>(items: &[String]) -> Result<Vec<T>> {
    items.iter().map(|s| s.trim().parse()).collect()
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Parse(m) => Error::Config(m),
        other => other,
    }
}

/// Config file (or defaults) with command-line overrides applied.
fn resolve_config(a: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &a.input {
        cfg.input = Some(p.clone());
    }
    if let Some(k) = &a.outcome_kind {
        cfg.outcome_kind = parse_outcome_kind(k)?;
    }
    if !a.stratum.is_empty() {
        cfg.strata = parse_list::<StratumId>(&a.stratum).map_err(config_error)?;
    }
    if let Some(c) = &a.contrast {
        cfg.contrast = c.parse().map_err(config_error)?;
    }
    if let Some(s) = &a.summary {
        cfg.summary = s.parse().map_err(config_error)?;
    }
    if let Some(b) = a.bootstrap {
        cfg.bootstrap.enabled = b > 0;
        cfg.bootstrap.replicates = b;
    }
    if let Some(l) = a.level {
        cfg.bootstrap.level = l;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(k) = a.folds {
        cfg.folds = k;
    }
    if let Some(kind) = &a.learner {
        cfg.propensity = LearnerSpec::new(kind);
        cfg.intermediate = LearnerSpec::new(kind);
        cfg.outcome = LearnerSpec::new(kind);
    }
    Ok(cfg)
}

fn load_data(cfg: &RunConfig) -> Result<Dataset> {
    let path = cfg
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("no input CSV (use --input or the `input` config key)".into()))?;
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_csv(BufReader::new(file), cfg.outcome_kind)
}

fn write_replicate_dump(path: &Path, parts: &[(Option<f64>, &pgce::RunOutput)], cfg: &RunConfig) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink(Some(path))?);
    w.write_record(output::REPLICATE_HEADER)?;
    for (eta0, out) in parts {
        if let Some(b) = &out.bootstrap {
            output::write_replicates(b, &out.reports, &cfg.contrast, cfg.summary, *eta0, &mut w)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn estimate(a: &EstimateArgs) -> Result<()> {
    let mut cfg = resolve_config(&a.run)?;
    if !a.estimator.is_empty() {
        cfg.estimators = parse_list::<Estimator>(&a.estimator)?;
    }
    cfg.validate()?;
    let data = load_data(&cfg)?;
    let out = run_estimate(&data, &cfg)?;
    if let Some(p) = &a.run.replicates_out {
        write_replicate_dump(p, &[(None, &out)], &cfg)?;
    }
    let mut w = sink(a.run.output.as_deref())?;
    match a.format.as_str() {
        "csv" => output::write_reports(&out.reports, &cfg.contrast, cfg.summary, &mut w)?,
        "json" => {
            let doc = serde_json::json!({ "config": cfg, "reports": out.reports });
            serde_json::to_writer_pretty(&mut w, &doc)?;
            writeln!(w)?;
        }
        other => return Err(Error::Config(format!("unknown format `{other}` (csv or json)"))),
    }
    w.flush()?;
    Ok(())
}

pub fn sensitivity(a: &SensitivityArgs) -> Result<()> {
    let mut cfg = resolve_config(&a.run)?;
    if !a.eta0.is_empty() {
        cfg.sensitivity.eta0 = a.eta0.clone();
    }
    if let Some(f) = &a.form {
        cfg.sensitivity.form = f.parse()?;
    }
    if let Some(e) = &a.estimator {
        cfg.sensitivity.estimator = match e.as_str() {
            "tr" => SensitivityEstimator::Tr,
            "dml" => SensitivityEstimator::Dml,
            other => {
                return Err(Error::Config(format!(
                    "sensitivity estimator must be tr or dml, got `{other}`"
                )))
            }
        };
    }
    cfg.validate()?;
    let data = load_data(&cfg)?;
    let runs = run_sensitivity(&data, &cfg)?;
    if let Some(p) = &a.run.replicates_out {
        let parts: Vec<(Option<f64>, &pgce::RunOutput)> =
            cfg.sensitivity.eta0.iter().map(|&e| Some(e)).zip(runs.iter()).collect();
        write_replicate_dump(p, &parts, &cfg)?;
    }
    let rows: Vec<(f64, pgce::EstimateReport)> = cfg
        .sensitivity
        .eta0
        .iter()
        .zip(&runs)
        .flat_map(|(&eta0, run)| run.reports.iter().map(move |r| (eta0, r.clone())))
        .collect();
    // one block per stratum, eta0 ascending within it
    let mut ordered = rows;
    ordered.sort_by(|x, y| {
        let sx = cfg.strata.iter().position(|&s| s == x.1.meta.stratum);
        let sy = cfg.strata.iter().position(|&s| s == y.1.meta.stratum);
        sx.cmp(&sy)
    });
    output::write_sensitivity(&ordered, sink(a.run.output.as_deref())?)
}

fn scenario_specs(text: &str) -> Result<Vec<ScenarioSpec>> {
    let mut value: serde_json::Value = serde_json::from_str(text)?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::Config("scenario config must be a JSON object".into()))?;
    if let Some(schema) = obj.remove("schema") {
        if schema != serde_json::json!(1) {
            return Err(Error::Config(format!("unsupported schema {schema} (expected 1)")));
        }
    }
    let labels: Option<Vec<String>> = obj.remove("scenarios").map(serde_json::from_value).transpose()?;
    let base: ScenarioSpec = serde_json::from_value(value)?;
    match labels {
        None => Ok(vec![base]),
        Some(ls) if ls.is_empty() => Err(Error::Config("empty scenario list".into())),
        Some(ls) => ls
            .iter()
            .map(|l| {
                let mut s = base.clone();
                s.correct = l.parse::<Correctness>()?;
                Ok(s)
            })
            .collect(),
    }
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.config).map_err(|e| Error::Io(format!("{}: {e}", a.config.display())))?;
    let mut specs = scenario_specs(&text)?;
    for s in &mut specs {
        if let Some(r) = a.reps {
            s.reps = r;
        }
        if let Some(n) = a.n {
            s.n = n;
        }
        if let Some(seed) = a.seed {
            s.seed = seed;
        }
    }
    let mut rows = Vec::new();
    let mut aggregates = Vec::new();
    for s in &specs {
        let r = run_scenario(s)?;
        rows.extend(r.rows);
        aggregates.extend(r.aggregates);
    }
    if let Some(p) = &a.summary_out {
        write_aggregates(&aggregates, sink(Some(p))?)?;
    }
    write_replications(&rows, sink(a.output.as_deref())?)
}

pub fn oracle(a: &OracleArgs) -> Result<()> {
    let kind: DgpKind = a.dgp.parse().map_err(config_error)?;
    let stratum: StratumId = a.stratum.parse().map_err(config_error)?;
    let contrast: ContrastFunction = a.contrast.parse().map_err(config_error)?;
    let summary: Summary = a.summary.parse().map_err(config_error)?;
    let spec = EstimandSpec::new(stratum, contrast.clone(), summary)?;
    let dgp = DgpSpec::new(kind).with_eta0(a.eta0);
    let truth = mc_oracle_truth(&dgp, &spec, a.draws, a.seed)?;
    output::write_oracle(
        kind.as_str(),
        stratum.as_str(),
        &contrast,
        summary,
        &truth,
        sink(a.output.as_deref())?,
    )
}
