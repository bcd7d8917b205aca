use std::path::PathBuf;

use clap::Args;
use dlife_core::diagnostics::{diagnose, AgeingReport};
use dlife_core::inference::{FitConfig, ModelKind};
use serde::Serialize;
use serde_json::{json, Value};

use crate::dataset::{self, Format};
use crate::error::CliError;
use crate::models::{expand, fit, ModelChoice, ModelSource};
use crate::report::{emit, parameters, report_warnings, DataSummary, ModelReport, Report};

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Dataset (flat `time,event` or grouped `n,count,event` CSV)
    #[arg(long)]
    pub input: PathBuf,
    /// Models to fit; repeat the flag for several
    #[arg(long, value_enum, default_value = "all")]
    pub model: Vec<ModelChoice>,
    /// Write the report here instead of stdout
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Convergence tolerance
    #[arg(long, default_value_t = FitConfig::default().tol)]
    pub tol: f64,
    #[arg(long, default_value_t = FitConfig::default().max_iterations)]
    pub max_iterations: usize,
}

#[derive(Debug, Serialize)]
struct FitResults {
    data: DataSummary,
    fits: Vec<ModelReport>,
}

pub fn run(args: &FitArgs) -> Result<(), CliError> {
    if !(args.tol > 0.0) || args.max_iterations == 0 {
        return Err(CliError::Input("--tol must be > 0 and --max-iterations at least 1".into()));
    }
    let data = dataset::read(&args.input)?;
    let config = FitConfig {
        tol: args.tol,
        max_iterations: args.max_iterations,
        ..FitConfig::default()
    };
    let mut warnings = Vec::new();
    let mut failures = Vec::new();
    let mut fits = Vec::new();
    for model in expand(&args.model) {
        let result = fit(model, &data.sample, &config);
        match &result {
            Ok(f) => report_warnings(&diagnose(&f.params), &mut warnings),
            Err(e) => failures.push(format!("{}: {}: {e}", model.name(), e.kind())),
        }
        fits.push(ModelReport::from_fit(model, &result));
    }
    warnings.extend(failures.iter().map(|f| format!("fit failed for {f}")));
    let inputs = json!({
        "input": args.input.display().to_string(),
        "format": data.format,
        "models": expand(&args.model).iter().map(ModelKind::name).collect::<Vec<_>>(),
        "tol": args.tol,
        "max_iterations": args.max_iterations,
    });
    let results = FitResults {
        data: DataSummary::of(&data.sample),
        fits,
    };
    emit(&Report::new("fit", inputs, results, warnings), args.output.as_deref())?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Fit(format!("fit failed for {}", failures.join("; "))))
    }
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub source: ModelSource,
    /// Write the report here instead of stdout
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Diagnosis {
    model: ModelKind,
    parameters: Value,
    ageing_report: AgeingReport,
}

#[derive(Debug, Serialize)]
struct DiagnoseResults {
    #[serde(skip_serializing_if = "Option::is_none")]
    data: Option<DataSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    format: Option<Format>,
    reports: Vec<Diagnosis>,
}

pub fn run_diagnose(args: &DiagnoseArgs) -> Result<(), CliError> {
    let resolved = args.source.resolve()?;
    let mut warnings = Vec::new();
    let reports: Vec<Diagnosis> = resolved
        .params()
        .iter()
        .map(|p| {
            let report = diagnose(p);
            report_warnings(&report, &mut warnings);
            Diagnosis {
                model: p.model(),
                parameters: parameters(p),
                ageing_report: report,
            }
        })
        .collect();
    let failures = resolved.failures();
    warnings.extend(failures.iter().map(|f| format!("fit failed for {f}")));
    let results = DiagnoseResults {
        data: resolved.dataset.as_ref().map(|d| DataSummary::of(&d.sample)),
        format: resolved.dataset.as_ref().map(|d| d.format),
        reports,
    };
    emit(
        &Report::new("diagnose", args.source.to_json(), results, warnings),
        args.output.as_deref(),
    )?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Fit(format!("fit failed for {}", failures.join("; "))))
    }
}
