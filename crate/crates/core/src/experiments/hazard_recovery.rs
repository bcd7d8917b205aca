use rayon::prelude::*;
use serde::Serialize;

use super::{cell, median, opt_cell, ExperimentConfig, ExperimentId, ExperimentOutput, Table, FLAG_FAILURE_RATE};
use crate::distributions::{weibull_quantile, DiscreteLifetime, IpdParams, W1Params};
use crate::inference::{fit_ipd, fit_w1, FitConfig, FitResult, FittedParams};
use crate::sampling::{apply_censoring, sample_ipd, sample_w1, LifetimeSample};

/// Generating hazard of a recovery scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Truth {
    W1(W1Params),
    Ipd(IpdParams),
}

impl Truth {
    fn hazard(&self, n: u64) -> f64 {
        match self {
            Truth::W1(p) => p.hazard(n).expect("n >= 1"),
            Truth::Ipd(p) => p.hazard(n).expect("n >= 1"),
        }
    }

    fn quantile(&self, q: f64) -> u64 {
        match self {
            Truth::W1(p) => (weibull_quantile(p, q).expect("q in (0, 1)").ceil() as u64).max(1),
            Truth::Ipd(p) => p.quantile(q).expect("q in (0, 1)"),
        }
    }
}

/// Stand-in truths: concave W1, convex W1, and an IPD self-check.
fn scenarios() -> [(&'static str, Truth); 3] {
    [
        ("concave_w1", Truth::W1(W1Params::new(300.0, 1.5).expect("valid"))),
        ("convex_w1", Truth::W1(W1Params::new(300.0, 2.5).expect("valid"))),
        ("ipd", Truth::Ipd(IpdParams::new(0.01, 0.001).expect("valid"))),
    ]
}

const FIT_MODELS: [&str; 2] = ["ipd", "w1"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryRecord {
    pub scenario: String,
    pub replicate: usize,
    pub model: String,
    pub status: String,
    /// Largest observed value; errors are taken over `1..=support_max`.
    pub support_max: u64,
    pub sup_error: Option<f64>,
    /// Sup error restricted to the true 5%..95% quantile range.
    pub central_sup_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoverySummary {
    pub scenario: String,
    pub model: String,
    pub fits: usize,
    pub failures: usize,
    pub mean_sup_error: Option<f64>,
    pub median_sup_error: Option<f64>,
    pub median_central_sup_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub scenario: String,
    pub n: u64,
    pub truth: f64,
    pub ipd: Option<f64>,
    pub w1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HazardRecoveryResult {
    pub records: Vec<RecoveryRecord>,
    pub summaries: Vec<RecoverySummary>,
    /// Hazard curves of replicate 0 over its observed support.
    pub curves: Vec<CurvePoint>,
}

impl HazardRecoveryResult {
    pub fn summary(&self, scenario: &str, model: &str) -> Option<&RecoverySummary> {
        self.summaries.iter().find(|s| s.scenario == scenario && s.model == model)
    }
}

fn fitted_hazard(fit: &FitResult, n: u64) -> f64 {
    match &fit.params {
        FittedParams::Ipd(p) => p.hazard(n).expect("n >= 1"),
        FittedParams::W1(p) => p.hazard(n).expect("n >= 1"),
        FittedParams::Weibull(p) => p.hazard_rate(n as f64),
    }
}

struct Replicate {
    records: Vec<RecoveryRecord>,
    curves: Vec<CurvePoint>,
}

fn run_replicate(config: &ExperimentConfig, s: usize, replicate: usize) -> Replicate {
    let (name, truth) = scenarios()[s];
    let size = config.sample_sizes[0];
    let rate = config.censor_rates[0];
    let mut rng = config.stream(s, replicate).rng();
    let sample: LifetimeSample = match truth {
        Truth::W1(p) => sample_w1(&p, size, &mut rng),
        Truth::Ipd(p) => sample_ipd(&p, size, &mut rng),
    }
    .expect("size >= 1");
    let sample = apply_censoring(&sample, rate, config.censoring, &mut rng).expect("validated rate");
    let support_max = sample.max_value().expect("nonempty");
    let (lo, hi) = (truth.quantile(0.05), truth.quantile(0.95));
    let fit_config = FitConfig::default();
    let fits = [
        fit_ipd(&sample.to_grouped(), &fit_config),
        fit_w1(&sample, &fit_config),
    ];
    let mut records = Vec::new();
    for (model, fit) in FIT_MODELS.iter().zip(&fits) {
        let (status, sup, central) = match fit {
            Ok(f) => {
                let mut sup = 0.0f64;
                let mut central = None::<f64>;
                for n in 1..=support_max {
                    let e = (fitted_hazard(f, n) - truth.hazard(n)).abs();
                    sup = sup.max(e);
                    if (lo..=hi).contains(&n) {
                        central = Some(central.unwrap_or(0.0).max(e));
                    }
                }
                ("ok".to_string(), Some(sup), central)
            }
            Err(e) => (e.kind().to_string(), None, None),
        };
        records.push(RecoveryRecord {
            scenario: name.to_string(),
            replicate,
            model: model.to_string(),
            status,
            support_max,
            sup_error: sup,
            central_sup_error: central,
        });
    }
    let curves = if replicate == 0 {
        (1..=support_max)
            .map(|n| CurvePoint {
                scenario: name.to_string(),
                n,
                truth: truth.hazard(n),
                ipd: fits[0].as_ref().ok().map(|f| fitted_hazard(f, n)),
                w1: fits[1].as_ref().ok().map(|f| fitted_hazard(f, n)),
            })
            .collect()
    } else {
        Vec::new()
    };
    Replicate { records, curves }
}

/// Fit IPD and W1 to samples from concave and convex truths and compare the
/// fitted hazards with the truth over the observed support.
pub fn run_hazard_recovery(config: &ExperimentConfig) -> HazardRecoveryResult {
    let tasks: Vec<(usize, usize)> = (0..scenarios().len())
        .flat_map(|s| (0..config.replicates).map(move |r| (s, r)))
        .collect();
    let replicates: Vec<Replicate> = tasks.par_iter().map(|&(s, r)| run_replicate(config, s, r)).collect();
    let mut records = Vec::new();
    let mut curves = Vec::new();
    for rep in replicates {
        records.extend(rep.records);
        curves.extend(rep.curves);
    }
    let mut summaries = Vec::new();
    for (name, _) in scenarios() {
        for model in FIT_MODELS {
            let group: Vec<&RecoveryRecord> = records.iter().filter(|r| r.scenario == name && r.model == model).collect();
            let sups: Vec<f64> = group.iter().filter_map(|r| r.sup_error).collect();
            let centrals: Vec<f64> = group.iter().filter_map(|r| r.central_sup_error).collect();
            summaries.push(RecoverySummary {
                scenario: name.to_string(),
                model: model.to_string(),
                fits: sups.len(),
                failures: group.len() - sups.len(),
                mean_sup_error: (!sups.is_empty()).then(|| sups.iter().sum::<f64>() / sups.len() as f64),
                median_sup_error: median(&sups),
                median_central_sup_error: median(&centrals),
            });
        }
    }
    HazardRecoveryResult {
        records,
        summaries,
        curves,
    }
}

impl HazardRecoveryResult {
    pub fn into_output(self) -> ExperimentOutput {
        let mut raw = Table::new([
            "scenario",
            "replicate",
            "model",
            "status",
            "support_max",
            "sup_error",
            "central_sup_error",
        ]);
        for r in &self.records {
            raw.push(vec![
                r.scenario.clone(),
                cell(r.replicate),
                r.model.clone(),
                r.status.clone(),
                cell(r.support_max),
                opt_cell(r.sup_error),
                opt_cell(r.central_sup_error),
            ]);
        }
        let mut summary = Table::new([
            "scenario",
            "model",
            "fits",
            "failures",
            "mean_sup_error",
            "median_sup_error",
            "median_central_sup_error",
        ]);
        let mut failures = 0;
        let mut flagged = Vec::new();
        for s in &self.summaries {
            failures += s.failures;
            if s.failures as f64 > FLAG_FAILURE_RATE * (s.fits + s.failures) as f64 {
                flagged.push(format!("{}/{}", s.scenario, s.model));
            }
            summary.push(vec![
                s.scenario.clone(),
                s.model.clone(),
                cell(s.fits),
                cell(s.failures),
                opt_cell(s.mean_sup_error),
                opt_cell(s.median_sup_error),
                opt_cell(s.median_central_sup_error),
            ]);
        }
        let mut curves = Table::new(["scenario", "n", "truth", "ipd", "w1"]);
        for c in &self.curves {
            curves.push(vec![c.scenario.clone(), cell(c.n), cell(c.truth), opt_cell(c.ipd), opt_cell(c.w1)]);
        }
        ExperimentOutput {
            experiment: ExperimentId::HazardRecovery,
            raw,
            summary,
            failures,
            flagged_scenarios: flagged,
            details: serde_json::json!({
                "truths": {
                    "concave_w1": {"eta": 300.0, "beta": 1.5},
                    "convex_w1": {"eta": 300.0, "beta": 2.5},
                    "ipd": {"alpha": 0.01, "zeta": 0.001},
                },
            }),
            extra_tables: vec![("curves".to_string(), curves)],
        }
    }
}
