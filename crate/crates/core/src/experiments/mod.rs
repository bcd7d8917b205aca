//! Reproducible simulation studies.
//!
//! Every replicate draws from its own [`SeededStream`]: the master seed plus a
//! stream id packing `(experiment, scenario, replicate)` as
//! `id << 56 | scenario << 32 | replicate`. Work is spread over rayon with
//! order-preserving collection, so outputs do not depend on scheduling.
//!
//! Each run produces a raw table (one row per replicate and model), a
//! summary table (one row per scenario) and a run manifest.

mod analytic;
mod closeness;
mod hazard_recovery;
mod ratio_bands;

use std::fmt::Display;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sampling::{CensoringScheme, SeededStream};

pub use analytic::{run_mttf_bounds, run_sup_distance, MttfBoundRow, SupDistanceRow};
pub use closeness::{run_closeness_study, ClosenessResult, ClosenessSummary, ErrorRecord, QUANTITIES};
pub use hazard_recovery::{run_hazard_recovery, CurvePoint, HazardRecoveryResult, RecoveryRecord, RecoverySummary};
pub use ratio_bands::{run_ratio_bands, RatioBandRow, RatioBandsResult, RatioRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    RatioBands,
    HazardRecovery,
    #[serde(alias = "closeness-study")]
    Closeness,
    SupDistance,
    MttfBounds,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 5] = [
        ExperimentId::RatioBands,
        ExperimentId::HazardRecovery,
        ExperimentId::Closeness,
        ExperimentId::SupDistance,
        ExperimentId::MttfBounds,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentId::RatioBands => "ratio-bands",
            ExperimentId::HazardRecovery => "hazard-recovery",
            ExperimentId::Closeness => "closeness",
            ExperimentId::SupDistance => "sup-distance",
            ExperimentId::MttfBounds => "mttf-bounds",
        }
    }

    fn code(&self) -> u64 {
        match self {
            ExperimentId::RatioBands => 1,
            ExperimentId::HazardRecovery => 2,
            ExperimentId::Closeness => 3,
            ExperimentId::SupDistance => 4,
            ExperimentId::MttfBounds => 5,
        }
    }
}

impl std::str::FromStr for ExperimentId {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "closeness-study" => Ok(ExperimentId::Closeness),
            _ => ExperimentId::ALL
                .into_iter()
                .find(|id| id.name() == s)
                .ok_or_else(|| ConfigError::UnknownExperiment(s.to_string())),
        }
    }
}

/// Scale values used by the ratio-band study.
pub const RATIO_BAND_SCALES: [f64; 4] = [10.0, 100.0, 500.0, 1000.0];
/// Shape rows of the ratio-band study (the first stands for `beta <= 0.9`).
pub const RATIO_BAND_SHAPES: [f64; 8] = [0.5, 1.0, 1.2, 1.5, 1.8, 2.0, 2.25, 2.5];
/// Scale values of the closeness study.
pub const CLOSENESS_SCALES: [f64; 6] = [10.0, 50.0, 300.0, 500.0, 800.0, 1000.0];
/// Shape values of the closeness study.
pub const CLOSENESS_SHAPES: [f64; 8] = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 5.0, 10.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub replicates: usize,
    pub sample_sizes: Vec<usize>,
    /// `(eta, beta)` pairs for the Weibull-based studies.
    pub parameter_grid: Vec<(f64, f64)>,
    pub censor_rates: Vec<f64>,
    #[serde(default)]
    pub censoring: CensoringScheme,
    pub master_seed: u64,
}

fn cartesian(etas: &[f64], betas: &[f64]) -> Vec<(f64, f64)> {
    etas.iter()
        .flat_map(|&eta| betas.iter().map(move |&beta| (eta, beta)))
        .collect()
}

impl ExperimentConfig {
    /// Desk-scale defaults.
    pub fn desk(experiment: ExperimentId) -> Self {
        let base = Self {
            experiment,
            replicates: 1,
            sample_sizes: vec![],
            parameter_grid: vec![],
            censor_rates: vec![0.0],
            censoring: CensoringScheme::default(),
            master_seed: 20_240_601,
        };
        match experiment {
            ExperimentId::RatioBands => Self {
                replicates: 100,
                sample_sizes: vec![1000],
                parameter_grid: cartesian(&RATIO_BAND_SCALES, &RATIO_BAND_SHAPES),
                ..base
            },
            ExperimentId::HazardRecovery => Self {
                replicates: 20,
                sample_sizes: vec![100],
                parameter_grid: vec![],
                ..base
            },
            ExperimentId::Closeness => Self {
                replicates: 200,
                sample_sizes: vec![50, 100],
                parameter_grid: cartesian(&CLOSENESS_SCALES, &CLOSENESS_SHAPES),
                censor_rates: vec![0.0, 0.25, 0.5, 0.75],
                ..base
            },
            ExperimentId::SupDistance => Self {
                parameter_grid: cartesian(&[10.0, 50.0, 300.0, 1000.0], &[1.0, 1.5, 2.3, 5.0]),
                ..base
            },
            ExperimentId::MttfBounds => Self {
                parameter_grid: cartesian(&CLOSENESS_SCALES, &CLOSENESS_SHAPES),
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.replicates == 0 {
            return Err(ConfigError::Invalid("replicates must be at least 1".into()));
        }
        if let Some(r) = self.censor_rates.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return Err(ConfigError::Invalid(format!("censor rate {r} is outside [0, 1)")));
        }
        if let Some(&(eta, beta)) = self
            .parameter_grid
            .iter()
            .find(|&&(eta, beta)| !(eta > 0.0 && eta.is_finite() && beta > 0.0 && beta.is_finite()))
        {
            return Err(ConfigError::Invalid(format!("grid point ({eta}, {beta}) is not a valid (eta, beta)")));
        }
        if self.sample_sizes.contains(&0) {
            return Err(ConfigError::Invalid("sample sizes must be positive".into()));
        }
        let needs_sizes = matches!(
            self.experiment,
            ExperimentId::RatioBands | ExperimentId::HazardRecovery | ExperimentId::Closeness
        );
        if needs_sizes && self.sample_sizes.is_empty() {
            return Err(ConfigError::Invalid("sample_sizes is empty".into()));
        }
        let needs_grid = !matches!(self.experiment, ExperimentId::HazardRecovery);
        if needs_grid && self.parameter_grid.is_empty() {
            return Err(ConfigError::Invalid("parameter_grid is empty".into()));
        }
        if self.censor_rates.is_empty() {
            return Err(ConfigError::Invalid("censor_rates is empty".into()));
        }
        Ok(())
    }

    /// Stream for replicate `replicate` of scenario `scenario`.
    pub fn stream(&self, scenario: usize, replicate: usize) -> SeededStream {
        SeededStream::new(self.master_seed, stream_id(self.experiment, scenario, replicate))
    }
}

/// Injective in `(experiment, scenario < 2^24, replicate < 2^32)`.
pub fn stream_id(experiment: ExperimentId, scenario: usize, replicate: usize) -> u64 {
    debug_assert!(scenario < 1 << 24 && (replicate as u64) < 1 << 32);
    (experiment.code() << 56) | ((scenario as u64) << 32) | replicate as u64
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("unknown experiment '{0}'")]
    UnknownExperiment(String),
    #[error("invalid experiment configuration: {0}")]
    Invalid(String),
}

/// Header plus rows of already formatted cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Cell by column name.
    pub fn cell(&self, row: usize, column: &str) -> Option<&str> {
        let j = self.header.iter().position(|h| h == column)?;
        self.rows.get(row).map(|r| r[j].as_str())
    }
}

pub(crate) fn cell<T: Display>(value: T) -> String {
    value.to_string()
}

pub(crate) fn opt_cell<T: Display>(value: Option<T>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// Median of a slice (sorted copy); `None` when empty.
pub(crate) fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Tables and bookkeeping of one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub experiment: ExperimentId,
    pub raw: Table,
    pub summary: Table,
    /// Fit failures over all scenarios.
    pub failures: usize,
    /// Scenario labels whose failure rate exceeded 20%.
    pub flagged_scenarios: Vec<String>,
    /// Experiment-specific figures for the manifest.
    pub details: serde_json::Value,
    /// Further tables, written as `<experiment>_<name>.csv`.
    pub extra_tables: Vec<(String, Table)>,
}

/// Failure share above which a scenario is flagged.
pub const FLAG_FAILURE_RATE: f64 = 0.2;

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, ConfigError> {
    config.validate()?;
    Ok(match config.experiment {
        ExperimentId::RatioBands => run_ratio_bands(config).into_output(),
        ExperimentId::HazardRecovery => run_hazard_recovery(config).into_output(),
        ExperimentId::Closeness => run_closeness_study(config).into_output(),
        ExperimentId::SupDistance => analytic::sup_distance_output(&run_sup_distance(config)),
        ExperimentId::MttfBounds => analytic::mttf_bounds_output(&run_mttf_bounds(config)),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArtifactPaths {
    pub raw: PathBuf,
    pub summary: PathBuf,
    pub manifest: PathBuf,
    pub extra: Vec<PathBuf>,
}

/// Write `<name>_raw.csv`, `<name>_summary.csv` and `<name>_manifest.json`.
pub fn write_artifacts(
    output: &ExperimentOutput,
    config: &ExperimentConfig,
    dir: &Path,
    wall_time_seconds: f64,
) -> io::Result<ArtifactPaths> {
    fs::create_dir_all(dir)?;
    let name = output.experiment.name();
    let paths = ArtifactPaths {
        raw: dir.join(format!("{name}_raw.csv")),
        summary: dir.join(format!("{name}_summary.csv")),
        manifest: dir.join(format!("{name}_manifest.json")),
        extra: output
            .extra_tables
            .iter()
            .map(|(table, _)| dir.join(format!("{name}_{table}.csv")))
            .collect(),
    };
    fs::write(&paths.raw, output.raw.to_csv())?;
    fs::write(&paths.summary, output.summary.to_csv())?;
    for (path, (_, table)) in paths.extra.iter().zip(&output.extra_tables) {
        fs::write(path, table.to_csv())?;
    }
    let manifest = serde_json::json!({
        "experiment": name,
        "config": config,
        "master_seed": config.master_seed,
        "software": {
            "name": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
        },
        "rng": "ChaCha8 (seed_from_u64 + set_stream)",
        "stream_id_layout": "experiment << 56 | scenario << 32 | replicate",
        "wall_time_seconds": wall_time_seconds,
        "fit_failures": output.failures,
        "flagged_scenarios": output.flagged_scenarios,
        "details": output.details,
        "files": {
            "raw": paths.raw.file_name().and_then(|f| f.to_str()),
            "summary": paths.summary.file_name().and_then(|f| f.to_str()),
            "extra": paths.extra.iter().filter_map(|p| p.file_name().and_then(|f| f.to_str())).collect::<Vec<_>>(),
        },
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
    fs::write(&paths.manifest, text + "\n")?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_ids_are_injective_on_samples() {
        let mut seen = std::collections::HashSet::new();
        for id in ExperimentId::ALL {
            for s in [0, 1, 77, (1 << 24) - 1] {
                for r in [0, 1, 4999, u32::MAX as usize] {
                    assert!(seen.insert(stream_id(id, s, r)));
                }
            }
        }
    }

    #[test]
    fn ids_round_trip_through_names() {
        for id in ExperimentId::ALL {
            assert_eq!(id.name().parse::<ExperimentId>().unwrap(), id);
            let json = serde_json::to_string(&id).unwrap();
            assert_eq!(json, format!("\"{}\"", id.name()));
        }
        assert!("bogus".parse::<ExperimentId>().is_err());
    }

    #[test]
    fn desk_configs_validate() {
        for id in ExperimentId::ALL {
            ExperimentConfig::desk(id).validate().unwrap();
        }
        let mut bad = ExperimentConfig::desk(ExperimentId::Closeness);
        bad.censor_rates.push(1.0);
        assert!(bad.validate().is_err());
        bad = ExperimentConfig::desk(ExperimentId::Closeness);
        bad.replicates = 0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let config = ExperimentConfig::desk(ExperimentId::RatioBands);
        let text = serde_json::to_string(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn artifacts_are_written() {
        let config = ExperimentConfig::desk(ExperimentId::MttfBounds);
        let output = run_experiment(&config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = write_artifacts(&output, &config, dir.path(), 0.5).unwrap();
        let summary = std::fs::read_to_string(&paths.summary).unwrap();
        assert!(summary.lines().count() >= 2);
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&paths.manifest).unwrap()).unwrap();
        assert_eq!(manifest["experiment"], "mttf-bounds");
        assert_eq!(manifest["master_seed"], config.master_seed);
    }
}
