use std::io::Write;

use eecop_core::bootstrap::run_bootstrap;
use eecop_core::estimator::estimate_from_model;
use eecop_core::simulate::{rmse_study, rows_to_csv};
use eecop_core::weights::fit_weight_model;
use eecop_core::{load_sample, Sample};

use crate::config::{BootstrapConfig, FitConfig, SimulateConfig, X0Spec};
use crate::failure::CliError;
use crate::output::{FitDocument, ModelEcho, PointOutput, SCHEMA};

type Result<T> = std::result::Result<T, CliError>;

/// Conditioning points from an inline vector or a CSV with the covariate columns.
pub fn resolve_x0(spec: &X0Spec, covariates: &[String]) -> Result<Vec<Vec<f64>>> {
    match spec {
        X0Spec::Empty => Ok(vec![Vec::new()]),
        X0Spec::Inline(v) => Ok(vec![v.clone()]),
        X0Spec::File(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config("x0_file", format!("cannot read x0 file {path}: {e}")))?;
            let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
            let headers = reader.headers().map_err(|e| CliError::config("x0_file", e.to_string()))?.clone();
            let idx = covariates
                .iter()
                .map(|c| {
                    headers
                        .iter()
                        .position(|h| h == c)
                        .ok_or_else(|| CliError::config("x0_file", format!("x0 file lacks column `{c}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut points = Vec::new();
            for (r, record) in reader.records().enumerate() {
                let record = record.map_err(|e| CliError::config("x0_file", e.to_string()))?;
                let row = idx
                    .iter()
                    .map(|&i| match record.get(i).unwrap_or("").parse::<f64>() {
                        Ok(v) if v.is_finite() => Ok(v),
                        _ => Err(CliError::config("x0_file", format!("x0 file row {}: bad value", r + 1))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                points.push(row);
            }
            if points.is_empty() {
                return Err(CliError::config("x0_file", "x0 file has no rows"));
            }
            Ok(points)
        }
    }
}

fn load(cfg: &FitConfig) -> Result<(Sample, Vec<Vec<f64>>)> {
    let sample = load_sample(&cfg.data, &cfg.response, &cfg.covariates)?;
    Ok((sample, resolve_x0(&cfg.x0, &cfg.covariates)?))
}

fn emit(out: Option<&str>, body: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| CliError { code: "io.error".into(), message: format!("{path}: {e}"), exit_code: crate::failure::EXIT_USAGE }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes()).and_then(|_| stdout.flush()).map_err(|e| CliError {
                code: "io.error".into(),
                message: e.to_string(),
                exit_code: crate::failure::EXIT_USAGE,
            })
        }
    }
}

fn document<'a>(cfg: &'a FitConfig, command: &'static str, sample: &'a Sample, model: Option<ModelEcho>, results: Vec<PointOutput>) -> FitDocument<'a> {
    FitDocument {
        schema: SCHEMA,
        command,
        family: &cfg.family,
        weights: &cfg.estimator.weights,
        n: sample.n(),
        response: sample.response_names(),
        covariates: sample.covariate_names(),
        model,
        results,
    }
}

fn to_json<T: serde::Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("output types serialize");
    s.push('\n');
    s
}

pub fn cmd_fit(cfg: &FitConfig) -> Result<()> {
    let (sample, points) = load(cfg)?;
    let model = fit_weight_model(&sample, &cfg.estimator.weights, None)?;
    let results = points
        .iter()
        .map(|x0| estimate_from_model(&model, &sample, x0, &cfg.family, &cfg.estimator.solver, None).map(PointOutput::from))
        .collect::<eecop_core::Result<Vec<_>>>()?;
    let doc = document(cfg, "fit", &sample, Some(ModelEcho::from_model(&model)), results);
    emit(cfg.out.as_deref(), &to_json(&doc))
}

pub fn cmd_bootstrap(cfg: &BootstrapConfig) -> Result<()> {
    let fit = &cfg.fit;
    let (sample, points) = load(fit)?;
    let spec = eecop_core::MultiplierSpec::exponential(cfg.replicates, cfg.seed)?;
    let model = fit_weight_model(&sample, &fit.estimator.weights, None)?;
    let results = points
        .iter()
        .map(|x0| {
            run_bootstrap(&sample, x0, &fit.family, &fit.estimator, &spec, cfg.alpha, cfg.threads).map(PointOutput::from)
        })
        .collect::<eecop_core::Result<Vec<_>>>()?;
    let doc = document(fit, "bootstrap", &sample, Some(ModelEcho::from_model(&model)), results);
    emit(fit.out.as_deref(), &to_json(&doc))
}

pub fn cmd_simulate(cfg: &SimulateConfig) -> Result<()> {
    let rows = rmse_study(&cfg.study, cfg.threads)?;
    emit(cfg.out.as_deref(), &rows_to_csv(&rows))
}
