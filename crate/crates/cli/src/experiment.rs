use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use dlife_core::experiments::{run_experiment, write_artifacts, ExperimentConfig, ExperimentId};

use crate::error::CliError;

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// ratio-bands, hazard-recovery, closeness, sup-distance or mttf-bounds
    pub experiment: Option<String>,
    /// JSON configuration; defaults to the desk-scale settings
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the replicate count
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Override the master seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for the artifacts
    #[arg(long, default_value = ".")]
    pub output: PathBuf,
}

pub fn config(args: &ExperimentArgs) -> Result<ExperimentConfig, CliError> {
    let named = args.experiment.as_deref().map(str::parse::<ExperimentId>).transpose()?;
    let mut config = match (&args.config, named) {
        (Some(path), named) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let config: ExperimentConfig = serde_json::from_str(&text)
                .map_err(|e| CliError::Input(format!("{}: invalid configuration: {e}", path.display())))?;
            if let Some(id) = named.filter(|&id| id != config.experiment) {
                return Err(CliError::Input(format!(
                    "experiment '{}' does not match '{}' in {}",
                    id.name(),
                    config.experiment.name(),
                    path.display()
                )));
            }
            config
        }
        (None, Some(id)) => ExperimentConfig::desk(id),
        (None, None) => return Err(CliError::Input("name an experiment or pass --config".into())),
    };
    if let Some(r) = args.replicates {
        config.replicates = r;
    }
    if let Some(s) = args.seed {
        config.master_seed = s;
    }
    config.validate()?;
    Ok(config)
}

pub fn run(args: &ExperimentArgs) -> Result<(), CliError> {
    let config = config(args)?;
    fs::create_dir_all(&args.output)?;
    eprintln!("seed: {}", config.master_seed);
    let start = Instant::now();
    let output = run_experiment(&config)?;
    let paths = write_artifacts(&output, &config, &args.output, start.elapsed().as_secs_f64())?;
    if output.failures > 0 {
        eprintln!("{} fits failed; see the manifest", output.failures);
    }
    for label in &output.flagged_scenarios {
        eprintln!("flagged: {label}");
    }
    println!("{}", paths.summary.display());
    Ok(())
}
