use serde::Serialize;

use super::{cell, ExperimentConfig, ExperimentId, ExperimentOutput, Table};
use crate::distributions::{weibull_quantile, DiscreteLifetime, W1Params, WeibullParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupDistanceRow {
    pub beta: f64,
    pub eta: f64,
    /// `max_n |P_W1[N = n] - f_W(n)|` over `1 <= n <= n_max`.
    pub sup_distance: f64,
    pub argmax_n: u64,
    /// `ceil` of the `1 - 1e-8` quantile.
    pub n_max: u64,
}

/// Sup-norm gap between the W1 pmf and the Weibull density at integers,
/// rows sorted by `(beta, eta)`.
pub fn run_sup_distance(config: &ExperimentConfig) -> Vec<SupDistanceRow> {
    let mut grid = config.parameter_grid.clone();
    grid.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    grid.iter()
        .map(|&(eta, beta)| {
            let w1 = W1Params::new(eta, beta).expect("validated grid");
            let w = WeibullParams::new(eta, beta).expect("validated grid");
            let n_max = (weibull_quantile(&w, 1.0 - 1e-8).expect("level in (0, 1)").ceil() as u64).max(1);
            let (mut sup, mut argmax) = (0.0f64, 1u64);
            for n in 1..=n_max {
                let gap = (w1.pmf(n).expect("n >= 1") - w.density(n as f64).expect("n > 0")).abs();
                if gap > sup {
                    sup = gap;
                    argmax = n;
                }
            }
            SupDistanceRow {
                beta,
                eta,
                sup_distance: sup,
                argmax_n: argmax,
                n_max,
            }
        })
        .collect()
}

pub(super) fn sup_distance_output(rows: &[SupDistanceRow]) -> ExperimentOutput {
    let mut raw = Table::new(["beta", "eta", "sup_distance", "argmax_n", "n_max"]);
    for r in rows {
        raw.push(vec![cell(r.beta), cell(r.eta), cell(r.sup_distance), cell(r.argmax_n), cell(r.n_max)]);
    }
    let mut summary = Table::new([
        "beta",
        "eta_min",
        "eta_max",
        "sup_at_eta_min",
        "sup_at_eta_max",
        "nonincreasing_in_eta",
    ]);
    let mut betas: Vec<f64> = rows.iter().map(|r| r.beta).collect();
    betas.dedup();
    let mut all_monotone = true;
    for beta in betas {
        let group: Vec<&SupDistanceRow> = rows.iter().filter(|r| r.beta == beta).collect();
        let monotone = group.windows(2).all(|w| w[1].sup_distance <= w[0].sup_distance);
        all_monotone &= monotone;
        let (first, last) = (group[0], group[group.len() - 1]);
        summary.push(vec![
            cell(beta),
            cell(first.eta),
            cell(last.eta),
            cell(first.sup_distance),
            cell(last.sup_distance),
            cell(monotone),
        ]);
    }
    ExperimentOutput {
        experiment: ExperimentId::SupDistance,
        raw,
        summary,
        failures: 0,
        flagged_scenarios: vec![],
        details: serde_json::json!({ "nonincreasing_for_every_beta": all_monotone }),
        extra_tables: vec![],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MttfBoundRow {
    pub eta: f64,
    pub beta: f64,
    pub weibull_mean: f64,
    pub w1_mttf: f64,
    /// `E_W1 - E_W`.
    pub gap: f64,
    /// `E_W <= E_W1 <= E_W + 1`.
    pub holds: bool,
}

/// Two-sided MTTF bound check, rows sorted by `(eta, beta)`.
pub fn run_mttf_bounds(config: &ExperimentConfig) -> Vec<MttfBoundRow> {
    let mut grid = config.parameter_grid.clone();
    grid.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    grid.iter()
        .map(|&(eta, beta)| {
            let mean = WeibullParams::new(eta, beta).expect("validated grid").mean();
            let mttf = W1Params::new(eta, beta).expect("validated grid").mttf();
            MttfBoundRow {
                eta,
                beta,
                weibull_mean: mean,
                w1_mttf: mttf,
                gap: mttf - mean,
                holds: mean <= mttf && mttf <= mean + 1.0,
            }
        })
        .collect()
}

pub(super) fn mttf_bounds_output(rows: &[MttfBoundRow]) -> ExperimentOutput {
    let mut raw = Table::new(["eta", "beta", "weibull_mean", "w1_mttf", "gap", "holds"]);
    for r in rows {
        raw.push(vec![
            cell(r.eta),
            cell(r.beta),
            cell(r.weibull_mean),
            cell(r.w1_mttf),
            cell(r.gap),
            cell(r.holds),
        ]);
    }
    let violations = rows.iter().filter(|r| !r.holds).count();
    let min_gap = rows.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min);
    let max_gap = rows.iter().map(|r| r.gap).fold(f64::NEG_INFINITY, f64::max);
    let mut summary = Table::new(["scenarios", "violations", "min_gap", "max_gap"]);
    summary.push(vec![cell(rows.len()), cell(violations), cell(min_gap), cell(max_gap)]);
    ExperimentOutput {
        experiment: ExperimentId::MttfBounds,
        raw,
        summary,
        failures: 0,
        flagged_scenarios: vec![],
        details: serde_json::json!({ "violations": violations }),
        extra_tables: vec![],
    }
}
