use std::fs;
use std::io::Write;
use std::path::Path;

use dlife_core::diagnostics::{diagnose, AgeingReport, PlausibilityFlag};
use dlife_core::inference::{Derived, FitError, FitResult, FittedParams, ModelKind};
use dlife_core::sampling::LifetimeSample;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;

pub const SCHEMA_VERSION: &str = "1.0.0";

#[derive(Debug, Serialize)]
pub struct Report<R: Serialize> {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub inputs: Value,
    pub results: R,
    pub warnings: Vec<String>,
}

impl<R: Serialize> Report<R> {
    pub fn new(command: &'static str, inputs: Value, results: R, warnings: Vec<String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command,
            inputs,
            results,
            warnings,
        }
    }
}

/// Pretty JSON to `output`, or stdout.
pub fn emit<R: Serialize>(report: &Report<R>, output: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(report).expect("reports serialize");
    text.push('\n');
    write_text(&text, output)
}

pub fn write_text(text: &str, output: Option<&Path>) -> Result<(), CliError> {
    match output {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct DataSummary {
    pub size: usize,
    pub failures: usize,
    pub censors: usize,
    pub sum: u64,
}

impl DataSummary {
    pub fn of(sample: &LifetimeSample) -> Self {
        Self {
            size: sample.len(),
            failures: sample.failure_count(),
            censors: sample.censored_count(),
            sum: sample.sum_observed(),
        }
    }
}

pub fn parameters(params: &FittedParams) -> Value {
    let [a, b] = params.model().parameter_names();
    let (x, y) = params.pair();
    json!({ a: x, b: y })
}

#[derive(Debug, Serialize)]
pub struct ModelReport {
    pub model: ModelKind,
    /// `ok` or the fit error kind.
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub parameters: Option<Value>,
    pub log_likelihood: Option<f64>,
    pub initial_log_likelihood: Option<f64>,
    pub converged: bool,
    pub iterations: Option<usize>,
    pub score_norm: Option<f64>,
    pub standard_errors: Option<Value>,
    pub derived: Option<Derived>,
    pub ageing_report: Option<AgeingReport>,
    /// Last iterate of a failed fit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub last_iterate: Option<Value>,
}

impl ModelReport {
    pub fn from_fit(model: ModelKind, fit: &Result<FitResult, FitError>) -> Self {
        match fit {
            Ok(f) => Self {
                model,
                status: "ok",
                error: None,
                parameters: Some(parameters(&f.params)),
                log_likelihood: Some(f.log_likelihood),
                initial_log_likelihood: Some(f.initial_log_likelihood),
                converged: f.converged,
                iterations: Some(f.iterations),
                score_norm: Some(f.score_norm),
                standard_errors: f.stderr_estimates.map(|[a, b]| {
                    let [na, nb] = model.parameter_names();
                    json!({ na: a, nb: b })
                }),
                derived: Some(f.derived()),
                ageing_report: Some(diagnose(&f.params)),
                last_iterate: None,
            },
            Err(e) => Self {
                model,
                status: e.kind(),
                error: Some(e.to_string()),
                parameters: None,
                log_likelihood: None,
                initial_log_likelihood: None,
                converged: false,
                iterations: None,
                score_norm: None,
                standard_errors: None,
                derived: None,
                ageing_report: None,
                last_iterate: e.last_iterate().map(|last| {
                    json!({
                        "parameters": parameters(&last.params),
                        "log_likelihood": last.log_likelihood,
                        "iterations": last.iterations,
                        "score_norm": last.score_norm,
                    })
                }),
            },
        }
    }
}

/// Warnings worth surfacing for an ageing report.
pub fn report_warnings(report: &AgeingReport, warnings: &mut Vec<String>) {
    let model = report.model.name();
    match report.plausibility_flag {
        PlausibilityFlag::ImplausibleRatioAboveOne => warnings.push(format!(
            "{model}: zeta/alpha = {} exceeds 1, an implausible ageing intensity",
            report.ratio_zeta_alpha.unwrap_or(f64::NAN)
        )),
        PlausibilityFlag::Boundary => warnings.push(format!("{model}: zeta/alpha is at the rejuvenation boundary")),
        PlausibilityFlag::Plausible => {}
    }
    if report.between_bands {
        warnings.push(format!("{model}: zeta/alpha falls between published bands; nearest band used"));
    }
}
