use std::path::PathBuf;

use clap::{Args, ValueEnum};
use dlife_core::distributions::{IpdParams, W1Params, WeibullParams};
use dlife_core::inference::{fit_ipd, fit_w1, fit_weibull, FitConfig, FitError, FitResult, FittedParams, ModelKind};
use dlife_core::sampling::LifetimeSample;
use serde_json::{json, Value};

use crate::dataset::{self, Dataset};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelChoice {
    Ipd,
    W1,
    Weibull,
    All,
}

/// Distinct models named by the choices, in `ipd, w1, weibull` order.
pub fn expand(choices: &[ModelChoice]) -> Vec<ModelKind> {
    let wants = |k: ModelChoice| choices.iter().any(|&c| c == k || c == ModelChoice::All);
    [
        (ModelChoice::Ipd, ModelKind::Ipd),
        (ModelChoice::W1, ModelKind::W1),
        (ModelChoice::Weibull, ModelKind::Weibull),
    ]
    .into_iter()
    .filter(|&(c, _)| wants(c))
    .map(|(_, k)| k)
    .collect()
}

pub fn fit(model: ModelKind, sample: &LifetimeSample, config: &FitConfig) -> Result<FitResult, FitError> {
    match model {
        ModelKind::Ipd => fit_ipd(&sample.to_grouped(), config),
        ModelKind::W1 => fit_w1(sample, config),
        ModelKind::Weibull => fit_weibull(sample, config),
    }
}

/// Model parameters given directly on the command line.
#[derive(Debug, Clone, Default, Args)]
pub struct ParamFlags {
    /// IPD failure probability at the first solicitation
    #[arg(long)]
    pub alpha: Option<f64>,
    /// IPD ageing intensity
    #[arg(long)]
    pub zeta: Option<f64>,
    /// Weibull-type scale
    #[arg(long)]
    pub eta: Option<f64>,
    /// Weibull-type shape
    #[arg(long)]
    pub beta: Option<f64>,
}

impl ParamFlags {
    fn any(&self) -> bool {
        self.alpha.is_some() || self.zeta.is_some() || self.eta.is_some() || self.beta.is_some()
    }

    pub fn params(&self, model: ModelKind) -> Result<FittedParams, CliError> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| CliError::Input(format!("model {} needs --{name}", model.name())))
        };
        Ok(match model {
            ModelKind::Ipd => FittedParams::Ipd(IpdParams::new(need(self.alpha, "alpha")?, need(self.zeta, "zeta")?)?),
            ModelKind::W1 => FittedParams::W1(W1Params::new(need(self.eta, "eta")?, need(self.beta, "beta")?)?),
            ModelKind::Weibull => {
                FittedParams::Weibull(WeibullParams::new(need(self.eta, "eta")?, need(self.beta, "beta")?)?)
            }
        })
    }

    pub fn to_json(&self) -> Value {
        json!({ "alpha": self.alpha, "zeta": self.zeta, "eta": self.eta, "beta": self.beta })
    }
}

/// Models taken either from a dataset (fitted in-line) or from parameter flags.
#[derive(Debug, Clone, Args)]
pub struct ModelSource {
    /// Dataset to fit (flat `time,event` or grouped `n,count,event` CSV)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Models to use; repeat the flag for several (default: all with --input)
    #[arg(long, value_enum)]
    pub model: Vec<ModelChoice>,
    #[command(flatten)]
    pub params: ParamFlags,
}

pub struct Resolved {
    pub dataset: Option<Dataset>,
    pub models: Vec<(ModelKind, Result<FitResult, FitError>)>,
    pub given: Vec<FittedParams>,
}

impl Resolved {
    /// Parameters of every usable model, fitted or given.
    pub fn params(&self) -> Vec<FittedParams> {
        self.models
            .iter()
            .filter_map(|(_, f)| f.as_ref().ok().map(|f| f.params))
            .chain(self.given.iter().copied())
            .collect()
    }

    pub fn failures(&self) -> Vec<String> {
        self.models
            .iter()
            .filter_map(|(m, f)| f.as_ref().err().map(|e| format!("{}: {}: {e}", m.name(), e.kind())))
            .collect()
    }
}

impl ModelSource {
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        match &self.input {
            Some(path) => {
                if self.params.any() {
                    return Err(CliError::Input(
                        "parameter flags cannot be combined with --input; models are fitted from the dataset".into(),
                    ));
                }
                let data = dataset::read(path)?;
                let choices = if self.model.is_empty() { vec![ModelChoice::All] } else { self.model.clone() };
                let config = FitConfig::default();
                let models = expand(&choices)
                    .into_iter()
                    .map(|m| (m, fit(m, &data.sample, &config)))
                    .collect();
                Ok(Resolved {
                    dataset: Some(data),
                    models,
                    given: vec![],
                })
            }
            None => {
                if self.model.is_empty() {
                    return Err(CliError::Input("give --input, or --model with its parameters".into()));
                }
                let given = expand(&self.model)
                    .into_iter()
                    .map(|m| self.params.params(m))
                    .collect::<Result<_, _>>()?;
                Ok(Resolved {
                    dataset: None,
                    models: vec![],
                    given,
                })
            }
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "input": self.input.as_ref().map(|p| p.display().to_string()),
            "models": expand(&self.model).iter().map(|m| m.name()).collect::<Vec<_>>(),
            "parameters": self.params.to_json(),
        })
    }
}
