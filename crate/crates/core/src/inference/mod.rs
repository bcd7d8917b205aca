//! Censored maximum likelihood and the Kaplan-Meier estimator.
//!
//! IPD fits run Newton-Raphson directly on `(alpha, zeta)` from the argmax
//! of a log-spaced grid. W1 and continuous Weibull fits run Newton ascent on
//! `(ln eta, ln beta)` from a profile-likelihood scan over `beta`. Every
//! accepted step is non-decreasing in log-likelihood.
//!
//! In the IPD likelihood the constant `A = sum k_i n_i + sum n_j - r` is the
//! exponent of `1 - alpha`.

mod ipd;
mod kaplan_meier;
mod weibull;

use serde::Serialize;
use thiserror::Error;

use crate::distributions::{
    weibull_quantile, DiscreteLifetime, IpdParams, ScaleShape, W1Params, WeibullParams,
};

pub use ipd::{fit_ipd, ipd_log_likelihood, IpdLikelihoodStats, IpdObjective};
pub use kaplan_meier::{kaplan_meier, KaplanMeierCurve, KaplanMeierStep};
pub use weibull::{fit_w1, fit_weibull, w1_log_likelihood, weibull_log_likelihood};

/// Quantile levels reported with every fit.
pub const DERIVED_QUANTILES: [f64; 4] = [0.5, 0.75, 0.9, 0.99];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ipd,
    W1,
    Weibull,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Ipd => "ipd",
            ModelKind::W1 => "w1",
            ModelKind::Weibull => "weibull",
        }
    }

    /// Names of the two fitted parameters, in [`FittedParams::pair`] order.
    pub fn parameter_names(&self) -> [&'static str; 2] {
        match self {
            ModelKind::Ipd => ["alpha", "zeta"],
            ModelKind::W1 | ModelKind::Weibull => ["eta", "beta"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum FittedParams {
    Ipd(IpdParams),
    W1(W1Params),
    Weibull(WeibullParams),
}

impl FittedParams {
    pub fn model(&self) -> ModelKind {
        match self {
            FittedParams::Ipd(_) => ModelKind::Ipd,
            FittedParams::W1(_) => ModelKind::W1,
            FittedParams::Weibull(_) => ModelKind::Weibull,
        }
    }

    /// `(alpha, zeta)` or `(eta, beta)`.
    pub fn pair(&self) -> (f64, f64) {
        match self {
            FittedParams::Ipd(p) => (p.alpha(), p.zeta()),
            FittedParams::W1(p) => (p.eta(), p.beta()),
            FittedParams::Weibull(p) => (p.eta(), p.beta()),
        }
    }

    pub fn mttf(&self) -> f64 {
        match self {
            FittedParams::Ipd(p) => p.mttf(),
            FittedParams::W1(p) => p.mttf(),
            FittedParams::Weibull(p) => p.mean(),
        }
    }

    /// Discrete quantile for IPD and W1, continuous for Weibull.
    pub fn quantile(&self, q: f64) -> f64 {
        match self {
            FittedParams::Ipd(p) => p.quantile(q).expect("q is a level in (0, 1)") as f64,
            FittedParams::W1(p) => weibull_quantile(p, q)
                .expect("q is a level in (0, 1)")
                .ceil()
                .max(1.0),
            FittedParams::Weibull(p) => weibull_quantile(p, q).expect("q is a level in (0, 1)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantilePoint {
    pub probability: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Derived {
    pub mttf: f64,
    pub quantiles: Vec<QuantilePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitConfig {
    /// Convergence tolerance on the score (see each fit for the norm used).
    pub tol: f64,
    pub max_iterations: usize,
    /// Points per axis of the IPD initialization grid.
    pub grid_size: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iterations: 200,
            grid_size: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub model: ModelKind,
    pub params: FittedParams,
    pub log_likelihood: f64,
    /// Log-likelihood at the initializer.
    pub initial_log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Final value of the convergence measure.
    pub score_norm: f64,
    /// Wald standard errors in the order of [`ModelKind::parameter_names`].
    pub stderr_estimates: Option<[f64; 2]>,
    /// Log-likelihood after each accepted iterate, initializer first.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

impl FitResult {
    pub fn derived(&self) -> Derived {
        Derived {
            mttf: self.params.mttf(),
            quantiles: DERIVED_QUANTILES
                .iter()
                .map(|&probability| QuantilePoint {
                    probability,
                    value: self.params.quantile(probability),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("sample is empty")]
    EmptySample,
    #[error("all records are right-censored; at least one failure is required")]
    AllCensored,
    #[error("all observations equal {value}; the shape parameter is unbounded")]
    DegenerateSample { value: u64 },
    #[error("Hessian is not invertible and no ascent step was found after {iterations} iterations")]
    NonInvertibleHessian { iterations: usize, last: Box<FitResult> },
    #[error("no convergence within {iterations} iterations")]
    MaxIterationsExceeded { iterations: usize, last: Box<FitResult> },
    #[error("line search found no ascent step after {iterations} iterations")]
    LineSearchFailed { iterations: usize, last: Box<FitResult> },
    #[error("iterates left the admissible region after {iterations} iterations")]
    Divergent { iterations: usize, last: Box<FitResult> },
}

impl FitError {
    /// Last iterate, when the optimizer got that far.
    pub fn last_iterate(&self) -> Option<&FitResult> {
        match self {
            FitError::NonInvertibleHessian { last, .. }
            | FitError::MaxIterationsExceeded { last, .. }
            | FitError::LineSearchFailed { last, .. }
            | FitError::Divergent { last, .. } => Some(last),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            FitError::EmptySample => "EmptySample",
            FitError::AllCensored => "AllCensored",
            FitError::DegenerateSample { .. } => "DegenerateSample",
            FitError::NonInvertibleHessian { .. } => "NonInvertibleHessian",
            FitError::MaxIterationsExceeded { .. } => "MaxIterationsExceeded",
            FitError::LineSearchFailed { .. } => "LineSearchFailed",
            FitError::Divergent { .. } => "Divergent",
        }
    }
}

pub(crate) type Mat2 = [[f64; 2]; 2];

/// Newton ascent direction `-H^{-1} g`, or `None` unless `H` is negative
/// definite with a determinant that is not negligible relative to its scale.
pub(crate) fn newton_direction(h: &Mat2, g: [f64; 2]) -> Option<[f64; 2]> {
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let scale = (h[0][0] * h[1][1]).abs() + (h[0][1] * h[1][0]).abs();
    if !(h[0][0] < 0.0 && det > 1e-12 * scale && det.is_finite()) {
        return None;
    }
    Some([
        -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
        -(h[0][0] * g[1] - h[1][0] * g[0]) / det,
    ])
}

/// Square roots of the diagonal of `(-H)^{-1}`.
pub(crate) fn wald_stderr(h: &Mat2) -> Option<[f64; 2]> {
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let scale = (h[0][0] * h[1][1]).abs() + (h[0][1] * h[1][0]).abs();
    if !(h[0][0] < 0.0 && det > 1e-12 * scale) {
        return None;
    }
    let v0 = -h[1][1] / det;
    let v1 = -h[0][0] / det;
    (v0 > 0.0 && v1 > 0.0).then(|| [v0.sqrt(), v1.sqrt()])
}

/// Accept a trial value that is not below the current one beyond rounding.
#[inline]
pub(crate) fn is_ascent(trial: f64, current: f64) -> bool {
    trial.is_finite() && trial >= current - 1e-12 * current.abs().max(1.0)
}
