//! Ageing classification and hazard-shape analysis.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::{IpdParams, ScaleShape, W1Params};
use crate::error::DomainError;
use crate::inference::{FittedParams, ModelKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum AgeingClass {
    Rejuvenation,
    NoAgeing,
    SoftDeceleratedAgeing,
    DeceleratedAgeing,
    NonAcceleratedAgeing,
    AcceleratedAgeing,
    StronglyAcceleratedAgeing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PlausibilityFlag {
    Plausible,
    ImplausibleRatioAboveOne,
    Boundary,
}

/// Published `zeta / alpha` magnitudes for discretized Weibull data.
pub const RATIO_BANDS: [(f64, f64, AgeingClass); 7] = [
    (8e-5, 1e-4, AgeingClass::NoAgeing),
    (5.8e-4, 7e-4, AgeingClass::SoftDeceleratedAgeing),
    (2.6e-3, 3.2e-3, AgeingClass::DeceleratedAgeing),
    (2e-2, 4e-2, AgeingClass::DeceleratedAgeing),
    (0.25, 0.35, AgeingClass::NonAcceleratedAgeing),
    (1.28, 1.35, AgeingClass::AcceleratedAgeing),
    (1.48, 1.85, AgeingClass::StronglyAcceleratedAgeing),
];

/// Ratios at or below this value are read as rejuvenation.
pub const REJUVENATION_RATIO: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioClassification {
    pub ageing_class: AgeingClass,
    pub plausibility_flag: PlausibilityFlag,
    /// The ratio falls in a gap of the published bands and was assigned to
    /// the band with the nearest edge in log scale.
    pub between_bands: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgeingReport {
    pub model: ModelKind,
    pub ageing_class: AgeingClass,
    pub ratio_zeta_alpha: Option<f64>,
    pub plausibility_flag: PlausibilityFlag,
    pub inflection_point: Option<u64>,
    pub between_bands: bool,
}

/// Ageing class of a Weibull shape parameter.
pub fn classify_beta(beta: f64) -> Result<AgeingClass, DomainError> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(DomainError::parameter("beta", beta, "a finite value > 0"));
    }
    Ok(if beta < 1.0 {
        AgeingClass::Rejuvenation
    } else if beta == 1.0 {
        AgeingClass::NoAgeing
    } else if beta < 2.0 {
        AgeingClass::DeceleratedAgeing
    } else if beta == 2.0 {
        AgeingClass::NonAcceleratedAgeing
    } else {
        AgeingClass::AcceleratedAgeing
    })
}

/// Place `zeta / alpha` in the published bands.
pub fn classify_ipd_ratio(params: &IpdParams) -> RatioClassification {
    let ratio = params.ratio();
    let flag = if ratio > 1.0 {
        PlausibilityFlag::ImplausibleRatioAboveOne
    } else if ratio <= REJUVENATION_RATIO {
        PlausibilityFlag::Boundary
    } else {
        PlausibilityFlag::Plausible
    };
    if ratio <= REJUVENATION_RATIO {
        return RatioClassification {
            ageing_class: AgeingClass::Rejuvenation,
            plausibility_flag: flag,
            between_bands: false,
        };
    }
    if let Some(&(_, _, class)) = RATIO_BANDS.iter().find(|&&(lo, hi, _)| (lo..=hi).contains(&ratio)) {
        return RatioClassification {
            ageing_class: class,
            plausibility_flag: flag,
            between_bands: false,
        };
    }
    let log_ratio = ratio.ln();
    let mut best = (REJUVENATION_RATIO.ln() - log_ratio).abs();
    let mut class = AgeingClass::Rejuvenation;
    for &(lo, hi, band) in &RATIO_BANDS {
        let distance = (lo.ln() - log_ratio).abs().min((hi.ln() - log_ratio).abs());
        if distance < best {
            best = distance;
            class = band;
        }
    }
    RatioClassification {
        ageing_class: class,
        plausibility_flag: flag,
        between_bands: true,
    }
}

/// `lambda(n) - 2 lambda(n-1) + lambda(n-2)` by direct differencing. For the
/// continuous Weibull the hazard rate is differenced at integer points.
pub fn hazard_second_difference(model: &FittedParams, n: u64) -> Result<f64, DomainError> {
    DomainError::check_index(n, 3)?;
    Ok(match model {
        FittedParams::Ipd(p) => p.hazard_at(n) - 2.0 * p.hazard_at(n - 1) + p.hazard_at(n - 2),
        FittedParams::W1(p) => w1_second_difference(p, n),
        FittedParams::Weibull(p) => {
            let h = |m: u64| p.hazard_rate(m as f64);
            h(n) - 2.0 * h(n - 1) + h(n - 2)
        }
    })
}

#[inline]
fn w1_second_difference(params: &W1Params, n: u64) -> f64 {
    params.hazard_at(n) - 2.0 * params.hazard_at(n - 1) + params.hazard_at(n - 2)
}

/// Smallest `n` in `[4, n_max]` whose second difference is nonpositive right
/// after a positive one. The scan stops once the hazard is within `1e-12`
/// of 1.
pub fn find_w1_inflection(params: &W1Params, n_max: u64) -> Option<u64> {
    let mut previous_positive = false;
    for n in 3..=n_max {
        if params.hazard_at(n) > 1.0 - 1e-12 {
            return None;
        }
        let d = w1_second_difference(params, n);
        if previous_positive && d <= 0.0 {
            return Some(n);
        }
        previous_positive = d > 0.0;
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InflectionRow {
    pub eta: f64,
    pub beta: f64,
    pub inflection_n: Option<u64>,
}

/// Inflection scan over a grid, rows ordered by `eta` then `beta` as given.
pub fn inflection_map(eta_grid: &[f64], beta_grid: &[f64], n_max: u64) -> Result<Vec<InflectionRow>, DomainError> {
    let points: Vec<(f64, f64)> = eta_grid
        .iter()
        .flat_map(|&eta| beta_grid.iter().map(move |&beta| (eta, beta)))
        .collect();
    let params = points
        .iter()
        .map(|&(eta, beta)| W1Params::new(eta, beta))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(params
        .par_iter()
        .map(|p| InflectionRow {
            eta: p.eta(),
            beta: p.beta(),
            inflection_n: find_w1_inflection(p, n_max),
        })
        .collect())
}

/// CSV with header `eta,beta,inflection_n`; absent inflections are empty.
pub fn write_inflection_csv<W: Write>(rows: &[InflectionRow], mut out: W) -> io::Result<()> {
    writeln!(out, "eta,beta,inflection_n")?;
    for row in rows {
        match row.inflection_n {
            Some(n) => writeln!(out, "{},{},{}", row.eta, row.beta, n)?,
            None => writeln!(out, "{},{},", row.eta, row.beta)?,
        }
    }
    Ok(())
}

/// Solicitation count past which W1 survival underflows (`z(n) > 745`).
fn w1_scan_limit(params: &W1Params) -> u64 {
    let n = params.eta() * 745f64.powf(1.0 / params.beta());
    (n.ceil() as u64).saturating_add(3).clamp(3, 100_000_000)
}

/// Ageing report for any fitted model.
pub fn diagnose(model: &FittedParams) -> AgeingReport {
    match model {
        FittedParams::Ipd(p) => {
            let c = classify_ipd_ratio(p);
            AgeingReport {
                model: ModelKind::Ipd,
                ageing_class: c.ageing_class,
                ratio_zeta_alpha: Some(p.ratio()),
                plausibility_flag: c.plausibility_flag,
                inflection_point: None,
                between_bands: c.between_bands,
            }
        }
        FittedParams::W1(p) => AgeingReport {
            model: ModelKind::W1,
            ageing_class: classify_beta(p.beta()).expect("validated shape"),
            ratio_zeta_alpha: None,
            plausibility_flag: PlausibilityFlag::Plausible,
            // concave (or monotone decreasing) below beta = 2
            inflection_point: if p.beta() > 2.0 {
                find_w1_inflection(p, w1_scan_limit(p))
            } else {
                None
            },
            between_bands: false,
        },
        FittedParams::Weibull(p) => AgeingReport {
            model: ModelKind::Weibull,
            ageing_class: classify_beta(p.beta()).expect("validated shape"),
            ratio_zeta_alpha: None,
            plausibility_flag: PlausibilityFlag::Plausible,
            inflection_point: None,
            between_bands: false,
        },
    }
}
