use rayon::prelude::*;
use serde::Serialize;

use super::{cell, median, opt_cell, ExperimentConfig, ExperimentId, ExperimentOutput, Table, FLAG_FAILURE_RATE};
use crate::diagnostics::{RATIO_BANDS, REJUVENATION_RATIO};
use crate::distributions::WeibullParams;
use crate::inference::{fit_ipd, FitConfig};
use crate::sampling::{apply_censoring, sample_weibull_discretized};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioRecord {
    pub eta: f64,
    pub beta: f64,
    pub size: usize,
    pub censor_rate: f64,
    pub replicate: usize,
    /// `ok` or the fit error kind.
    pub status: String,
    pub alpha: Option<f64>,
    pub zeta: Option<f64>,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioBandRow {
    pub beta: f64,
    pub fits: usize,
    pub failures: usize,
    pub min_ratio: Option<f64>,
    pub median_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
    /// Published range for this shape, when it is one of the table rows.
    pub published: Option<(f64, f64)>,
}

impl RatioBandRow {
    /// Whether `[min, max]` meets the published range widened by a factor 10
    /// on both sides.
    pub fn overlaps_published_within_decade(&self) -> Option<bool> {
        let (lo, hi) = self.published?;
        let (min, max) = (self.min_ratio?, self.max_ratio?);
        Some(max >= lo / 10.0 && min <= hi * 10.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioBandsResult {
    pub records: Vec<RatioRecord>,
    /// One row per shape value, ascending.
    pub rows: Vec<RatioBandRow>,
}

/// Published range for a shape row; the `<= 0.9` row is `[0, 1e-5]`.
pub fn published_range(beta: f64) -> Option<(f64, f64)> {
    const SHAPES: [f64; 7] = [1.0, 1.2, 1.5, 1.8, 2.0, 2.25, 2.5];
    if beta <= 0.9 {
        return Some((0.0, REJUVENATION_RATIO));
    }
    SHAPES
        .iter()
        .position(|&b| b == beta)
        .map(|i| (RATIO_BANDS[i].0, RATIO_BANDS[i].1))
}

/// Fitted IPD `zeta / alpha` on discretized Weibull samples.
pub fn run_ratio_bands(config: &ExperimentConfig) -> RatioBandsResult {
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
    let fit_config = FitConfig::default();
    let records: Vec<RatioRecord> = tasks
        .par_iter()
        .map(|&(s, replicate)| {
            let (eta, beta, size, rate) = scenarios[s];
            let mut rng = config.stream(s, replicate).rng();
            let params = WeibullParams::new(eta, beta).expect("validated grid");
            let sample = sample_weibull_discretized(&params, size, &mut rng).expect("size >= 1");
            let sample = apply_censoring(&sample, rate, config.censoring, &mut rng);
            let fit = sample
                .map_err(|e| e.to_string())
                .and_then(|s| fit_ipd(&s.to_grouped(), &fit_config).map_err(|e| e.kind().to_string()));
            let (status, alpha, zeta) = match fit {
                Ok(f) => {
                    let (a, z) = f.params.pair();
                    ("ok".to_string(), Some(a), Some(z))
                }
                Err(kind) => (kind, None, None),
            };
            RatioRecord {
                eta,
                beta,
                size,
                censor_rate: rate,
                replicate,
                status,
                alpha,
                zeta,
                ratio: alpha.zip(zeta).map(|(a, z)| z / a),
            }
        })
        .collect();
    let mut betas: Vec<f64> = config.parameter_grid.iter().map(|&(_, b)| b).collect();
    betas.sort_by(f64::total_cmp);
    betas.dedup();
    let rows = betas
        .into_iter()
        .map(|beta| {
            let group: Vec<&RatioRecord> = records.iter().filter(|r| r.beta == beta).collect();
            let ratios: Vec<f64> = group.iter().filter_map(|r| r.ratio).collect();
            RatioBandRow {
                beta,
                fits: ratios.len(),
                failures: group.len() - ratios.len(),
                min_ratio: ratios.iter().copied().reduce(f64::min),
                median_ratio: median(&ratios),
                max_ratio: ratios.iter().copied().reduce(f64::max),
                published: published_range(beta),
            }
        })
        .collect();
    RatioBandsResult { records, rows }
}

impl RatioBandsResult {
    /// Medians strictly increase along the shape rows at or above `beta = 1`.
    pub fn medians_strictly_increasing(&self) -> bool {
        let medians: Vec<Option<f64>> = self.rows.iter().filter(|r| r.beta >= 1.0).map(|r| r.median_ratio).collect();
        medians.iter().all(Option::is_some) && medians.windows(2).all(|w| w[0] < w[1])
    }

    pub fn into_output(self) -> ExperimentOutput {
        let mut raw = Table::new([
            "eta", "beta", "size", "censor_rate", "replicate", "status", "alpha", "zeta", "ratio",
        ]);
        for r in &self.records {
            raw.push(vec![
                cell(r.eta),
                cell(r.beta),
                cell(r.size),
                cell(r.censor_rate),
                cell(r.replicate),
                r.status.clone(),
                opt_cell(r.alpha),
                opt_cell(r.zeta),
                opt_cell(r.ratio),
            ]);
        }
        let mut summary = Table::new([
            "beta",
            "fits",
            "failures",
            "min_ratio",
            "median_ratio",
            "max_ratio",
            "published_low",
            "published_high",
            "overlaps_within_decade",
        ]);
        let mut flagged = Vec::new();
        let mut failures = 0;
        for row in &self.rows {
            failures += row.failures;
            if row.failures as f64 > FLAG_FAILURE_RATE * (row.fits + row.failures) as f64 {
                flagged.push(format!("beta={}", row.beta));
            }
            summary.push(vec![
                cell(row.beta),
                cell(row.fits),
                cell(row.failures),
                opt_cell(row.min_ratio),
                opt_cell(row.median_ratio),
                opt_cell(row.max_ratio),
                opt_cell(row.published.map(|p| p.0)),
                opt_cell(row.published.map(|p| p.1)),
                opt_cell(row.overlaps_published_within_decade()),
            ]);
        }
        let details = serde_json::json!({
            "medians_strictly_increasing": self.medians_strictly_increasing(),
        });
        ExperimentOutput {
            experiment: ExperimentId::RatioBands,
            raw,
            summary,
            failures,
            flagged_scenarios: flagged,
            details,
            extra_tables: vec![],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_rows() {
        assert_eq!(published_range(0.5), Some((0.0, 1e-5)));
        assert_eq!(published_range(1.0), Some((8e-5, 1e-4)));
        assert_eq!(published_range(2.5), Some((1.48, 1.85)));
        assert_eq!(published_range(3.0), None);
    }

    #[test]
    fn small_run_is_deterministic_and_ordered() {
        let config = ExperimentConfig {
            replicates: 3,
            sample_sizes: vec![200],
            parameter_grid: vec![(100.0, 1.0), (100.0, 2.5), (100.0, 0.5)],
            ..ExperimentConfig::desk(ExperimentId::RatioBands)
        };
        let a = run_ratio_bands(&config);
        let b = run_ratio_bands(&config);
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 9);
        assert_eq!(a.rows.iter().map(|r| r.beta).collect::<Vec<_>>(), vec![0.5, 1.0, 2.5]);
        for row in &a.rows {
            assert_eq!(row.fits + row.failures, 3);
        }
        let strong = a.rows.iter().find(|r| r.beta == 2.5).unwrap();
        assert!(strong.median_ratio.unwrap() > 1.0);
        let rejuvenation = a.rows.iter().find(|r| r.beta == 0.5).unwrap();
        assert!(rejuvenation.max_ratio.unwrap() <= 1e-5);
    }
}
