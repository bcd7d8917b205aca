use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, ValueEnum};
use dlife_core::distributions::{IpdParams, W1Params, WeibullParams};
use dlife_core::sampling::{apply_censoring, sample_ipd, sample_w1, sample_weibull_discretized, CensoringScheme, SeededStream};

use crate::dataset::to_flat_csv;
use crate::error::CliError;
use crate::models::ParamFlags;
use crate::report::write_text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SampleModel {
    Ipd,
    W1,
    /// Continuous Weibull rounded up to the next integer
    Weibull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Censoring {
    UniformBelowLifetime,
    ExactCount,
    Independent,
}

impl From<Censoring> for CensoringScheme {
    fn from(c: Censoring) -> Self {
        match c {
            Censoring::UniformBelowLifetime => CensoringScheme::UniformBelowLifetime,
            Censoring::ExactCount => CensoringScheme::ExactCount,
            Censoring::Independent => CensoringScheme::Independent,
        }
    }
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, value_enum)]
    pub model: SampleModel,
    #[command(flatten)]
    pub params: ParamFlags,
    /// Number of lifetimes to draw
    #[arg(long)]
    pub count: usize,
    /// Expected fraction of right-censored records, in [0, 1)
    #[arg(long, default_value_t = 0.0)]
    pub censor_rate: f64,
    /// How censored records are placed
    #[arg(long, value_enum, default_value = "uniform-below-lifetime")]
    pub censoring: Censoring,
    /// Random seed; one is generated and printed to stderr when absent
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the CSV here instead of stdout
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run(args: &SampleArgs) -> Result<(), CliError> {
    if args.count == 0 {
        return Err(CliError::Input("--count must be at least 1".into()));
    }
    let seed = args.seed.unwrap_or_else(|| {
        let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos());
        let seed = nanos as u64 ^ (nanos >> 64) as u64;
        eprintln!("seed: {seed}");
        seed
    });
    let mut rng = SeededStream::new(seed, 0).rng();
    let p = &args.params;
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| CliError::Input(format!("--{name} is required for this model")));
    let sample = match args.model {
        SampleModel::Ipd => sample_ipd(&IpdParams::new(need(p.alpha, "alpha")?, need(p.zeta, "zeta")?)?, args.count, &mut rng)?,
        SampleModel::W1 => sample_w1(&W1Params::new(need(p.eta, "eta")?, need(p.beta, "beta")?)?, args.count, &mut rng)?,
        SampleModel::Weibull => sample_weibull_discretized(
            &WeibullParams::new(need(p.eta, "eta")?, need(p.beta, "beta")?)?,
            args.count,
            &mut rng,
        )?,
    };
    let sample = apply_censoring(&sample, args.censor_rate, args.censoring.into(), &mut rng)?;
    write_text(&to_flat_csv(&sample), args.output.as_deref())
}
