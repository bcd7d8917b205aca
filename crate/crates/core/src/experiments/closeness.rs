use rayon::prelude::*;
use serde::Serialize;

use super::{cell, opt_cell, ExperimentConfig, ExperimentId, ExperimentOutput, Table, FLAG_FAILURE_RATE};
use crate::distributions::{weibull_quantile, DiscreteLifetime, ScaleShape, W1Params};
use crate::inference::{fit_w1, fit_weibull, FitConfig, FittedParams};
use crate::sampling::{apply_censoring, sample_w1};

/// Quantities compared in the closeness study, in column order.
pub const QUANTITIES: [&str; 11] = [
    "eta",
    "beta",
    "mttf",
    "q50",
    "q75",
    "q90",
    "q99",
    "hazard_at_q50",
    "hazard_at_q75",
    "hazard_at_q90",
    "hazard_at_q99",
];

const LEVELS: [f64; 4] = [0.5, 0.75, 0.9, 0.99];
const MODELS: [&str; 2] = ["w1", "weibull"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub eta: f64,
    pub beta: f64,
    pub censor_rate: f64,
    pub size: usize,
    pub replicate: usize,
    pub model: String,
    /// `ok` or the fit error kind.
    pub status: String,
    /// `(true - estimate) / true`, indexed like [`QUANTITIES`].
    pub relative_errors: Option<[f64; 11]>,
}

impl ErrorRecord {
    pub fn error(&self, quantity: &str) -> Option<f64> {
        let j = QUANTITIES.iter().position(|&q| q == quantity)?;
        self.relative_errors.map(|e| e[j])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosenessSummary {
    pub eta: f64,
    pub beta: f64,
    pub censor_rate: f64,
    pub size: usize,
    /// Replicates where both fits converged; means are taken over these.
    pub paired: usize,
    /// Replicates where at least one fit failed.
    pub failures: usize,
    pub w1_failures: usize,
    pub weibull_failures: usize,
    pub mean_w1: Option<[f64; 11]>,
    pub mean_weibull: Option<[f64; 11]>,
}

impl ClosenessSummary {
    /// Paired mean errors `(w1, weibull)` for one quantity.
    pub fn point(&self, quantity: &str) -> Option<(f64, f64)> {
        let j = QUANTITIES.iter().position(|&q| q == quantity)?;
        Some((self.mean_w1?[j], self.mean_weibull?[j]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosenessResult {
    pub records: Vec<ErrorRecord>,
    pub summaries: Vec<ClosenessSummary>,
}

/// True values of every quantity under the generating W1 law.
fn truth(params: &W1Params) -> ([f64; 11], [u64; 4]) {
    let mut values = [0.0; 11];
    let mut at = [0; 4];
    values[0] = params.eta();
    values[1] = params.beta();
    values[2] = params.mttf();
    for (k, &p) in LEVELS.iter().enumerate() {
        let t = weibull_quantile(params, p).expect("level in (0, 1)");
        at[k] = (t.ceil() as u64).max(1);
        values[3 + k] = t;
        values[7 + k] = params.hazard(at[k]).expect("n >= 1");
    }
    (values, at)
}

fn estimates(fit: &FittedParams, at: &[u64; 4]) -> [f64; 11] {
    let mut values = [0.0; 11];
    let (eta, beta) = fit.pair();
    values[0] = eta;
    values[1] = beta;
    for (k, &p) in LEVELS.iter().enumerate() {
        values[3 + k] = match fit {
            FittedParams::W1(w) => weibull_quantile(w, p),
            FittedParams::Weibull(w) => weibull_quantile(w, p),
            FittedParams::Ipd(_) => unreachable!("closeness fits are Weibull-type"),
        }
        .expect("level in (0, 1)");
    }
    match fit {
        FittedParams::W1(w) => {
            values[2] = w.mttf();
            for k in 0..4 {
                values[7 + k] = w.hazard(at[k]).expect("n >= 1");
            }
        }
        FittedParams::Weibull(w) => {
            values[2] = w.mean();
            for k in 0..4 {
                values[7 + k] = w.hazard_rate(at[k] as f64);
            }
        }
        FittedParams::Ipd(_) => unreachable!("closeness fits are Weibull-type"),
    }
    values
}

fn run_replicate(config: &ExperimentConfig, s: usize, scenario: (f64, f64, usize, f64), replicate: usize) -> [ErrorRecord; 2] {
    let (eta, beta, size, rate) = scenario;
    let params = W1Params::new(eta, beta).expect("validated grid");
    let (true_values, at) = truth(&params);
    let mut rng = config.stream(s, replicate).rng();
    let sample = sample_w1(&params, size, &mut rng).expect("size >= 1");
    let sample = apply_censoring(&sample, rate, config.censoring, &mut rng).expect("validated rate");
    let fit_config = FitConfig::default();
    let fits = [fit_w1(&sample, &fit_config), fit_weibull(&sample, &fit_config)];
    let record = |k: usize| {
        let (status, relative_errors) = match &fits[k] {
            Ok(f) => {
                let est = estimates(&f.params, &at);
                let errors = std::array::from_fn(|j| (true_values[j] - est[j]) / true_values[j]);
                ("ok".to_string(), Some(errors))
            }
            Err(e) => (e.kind().to_string(), None),
        };
        ErrorRecord {
            eta,
            beta,
            censor_rate: rate,
            size,
            replicate,
            model: MODELS[k].to_string(),
            status,
            relative_errors,
        }
    };
    [record(0), record(1)]
}

fn mean_of(rows: &[[f64; 11]]) -> Option<[f64; 11]> {
    if rows.is_empty() {
        return None;
    }
    let n = rows.len() as f64;
    Some(std::array::from_fn(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n))
}

/// Fit W1 and Weibull to W1 samples and compare relative errors of both fits.
pub fn run_closeness_study(config: &ExperimentConfig) -> ClosenessResult {
    let mut scenarios = Vec::new();
    for &(eta, beta) in &config.parameter_grid {
        for &size in &config.sample_sizes {
            for &rate in &config.censor_rates {
                scenarios.push((eta, beta, size, rate));
            }
        }
    }
    let tasks: Vec<(usize, usize)> = (0..scenarios.len())
        .flat_map(|s| (0..config.replicates).map(move |r| (s, r)))
        .collect();
    let pairs: Vec<[ErrorRecord; 2]> = tasks
        .par_iter()
        .map(|&(s, r)| run_replicate(config, s, scenarios[s], r))
        .collect();
    let summaries = pairs
        .chunks(config.replicates)
        .zip(&scenarios)
        .map(|(chunk, &(eta, beta, size, rate))| {
            let (mut w1, mut weibull) = (Vec::new(), Vec::new());
            for [a, b] in chunk {
                if let (Some(x), Some(y)) = (a.relative_errors, b.relative_errors) {
                    w1.push(x);
                    weibull.push(y);
                }
            }
            ClosenessSummary {
                eta,
                beta,
                censor_rate: rate,
                size,
                paired: w1.len(),
                failures: chunk.len() - w1.len(),
                w1_failures: chunk.iter().filter(|p| p[0].relative_errors.is_none()).count(),
                weibull_failures: chunk.iter().filter(|p| p[1].relative_errors.is_none()).count(),
                mean_w1: mean_of(&w1),
                mean_weibull: mean_of(&weibull),
            }
        })
        .collect();
    ClosenessResult {
        records: pairs.into_iter().flatten().collect(),
        summaries,
    }
}

impl ClosenessResult {
    /// Scenarios with `eta >= min_eta` and `censor_rate >= min_rate` whose paired
    /// means for `quantities` differ by `band` or more, or that have no paired
    /// replicate. Entries are `(summary index, quantity, |w1 - weibull|)`.
    pub fn band_violations(&self, min_eta: f64, min_rate: f64, quantities: &[&str], band: f64) -> Vec<(usize, String, f64)> {
        let mut out = Vec::new();
        for (i, s) in self.summaries.iter().enumerate() {
            if s.eta < min_eta || s.censor_rate < min_rate {
                continue;
            }
            for &q in quantities {
                let gap = s.point(q).map_or(f64::INFINITY, |(a, b)| (a - b).abs());
                if !(gap < band) {
                    out.push((i, q.to_string(), gap));
                }
            }
        }
        out
    }

    pub fn into_output(self) -> ExperimentOutput {
        let mut header = vec!["eta", "beta", "censor_rate", "size", "replicate", "model", "status"];
        header.extend(QUANTITIES);
        let mut raw = Table::new(header);
        for r in &self.records {
            let mut row = vec![
                cell(r.eta),
                cell(r.beta),
                cell(r.censor_rate),
                cell(r.size),
                cell(r.replicate),
                r.model.clone(),
                r.status.clone(),
            ];
            row.extend((0..11).map(|j| opt_cell(r.relative_errors.map(|e| e[j]))));
            raw.push(row);
        }
        let mut header: Vec<String> = ["eta", "beta", "censor_rate", "size", "paired", "failures", "w1_failures", "weibull_failures"]
            .map(String::from)
            .to_vec();
        for model in MODELS {
            header.extend(QUANTITIES.iter().map(|q| format!("mean_{model}_{q}")));
        }
        let mut summary = Table::new(header);
        let mut paired = Table::new(["eta", "beta", "censor_rate", "size", "quantity", "w1_error", "weibull_error"]);
        let mut failures = 0;
        let mut flagged = Vec::new();
        for s in &self.summaries {
            failures += s.failures;
            let label = format!("eta={},beta={},rate={},size={}", s.eta, s.beta, s.censor_rate, s.size);
            if s.failures as f64 > FLAG_FAILURE_RATE * (s.paired + s.failures) as f64 {
                flagged.push(label);
            }
            let mut row = vec![
                cell(s.eta),
                cell(s.beta),
                cell(s.censor_rate),
                cell(s.size),
                cell(s.paired),
                cell(s.failures),
                cell(s.w1_failures),
                cell(s.weibull_failures),
            ];
            for means in [s.mean_w1, s.mean_weibull] {
                row.extend((0..11).map(|j| opt_cell(means.map(|m| m[j]))));
            }
            summary.push(row);
            for q in QUANTITIES {
                if let Some((a, b)) = s.point(q) {
                    paired.push(vec![
                        cell(s.eta),
                        cell(s.beta),
                        cell(s.censor_rate),
                        cell(s.size),
                        q.to_string(),
                        cell(a),
                        cell(b),
                    ]);
                }
            }
        }
        let violations = self.band_violations(300.0, 0.5, &["eta", "beta", "mttf"], 0.05).len();
        ExperimentOutput {
            experiment: ExperimentId::Closeness,
            raw,
            summary,
            failures,
            flagged_scenarios: flagged,
            details: serde_json::json!({
                "band_violations_eta_ge_300_rate_ge_0.5": violations,
            }),
            extra_tables: vec![("paired".to_string(), paired)],
        }
    }
}
