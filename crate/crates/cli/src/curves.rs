use std::path::PathBuf;

use clap::Args;
use dlife_core::distributions::DiscreteLifetime;
use dlife_core::inference::{kaplan_meier, FittedParams};

use crate::error::CliError;
use crate::models::ModelSource;
use crate::report::write_text;

#[derive(Debug, Args)]
pub struct CurvesArgs {
    #[command(flatten)]
    pub source: ModelSource,
    /// Inclusive range `first:last` of solicitation counts
    #[arg(long)]
    pub range: Option<String>,
    /// Grid step
    #[arg(long, default_value_t = 1)]
    pub step: u64,
    /// Allow the range to go past the largest observation of the dataset
    #[arg(long)]
    pub extend_range: bool,
    /// Write the CSV here instead of stdout
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn parse_range(text: &str) -> Result<(u64, u64), CliError> {
    let bad = || CliError::Input(format!("--range must look like 'first:last' with integers >= 1, got '{text}'"));
    let (a, b) = text.split_once(':').ok_or_else(bad)?;
    let a: u64 = a.trim().parse().map_err(|_| bad())?;
    let b: u64 = b.trim().parse().map_err(|_| bad())?;
    if a == 0 {
        return Err(bad());
    }
    if b < a {
        return Err(CliError::Input(format!("--range is inverted: {a} > {b}")));
    }
    Ok((a, b))
}

/// `(cdf, survival, hazard)` at `n`; the Weibull hazard is its rate.
fn point(p: &FittedParams, n: u64) -> (f64, f64, f64) {
    match p {
        FittedParams::Ipd(q) => (q.cdf(n), q.survival(n), q.hazard(n).expect("n >= 1")),
        FittedParams::W1(q) => (q.cdf(n), q.survival(n), q.hazard(n).expect("n >= 1")),
        FittedParams::Weibull(q) => (q.cdf(n as f64), q.survival(n as f64), q.hazard_rate(n as f64)),
    }
}

pub fn run(args: &CurvesArgs) -> Result<(), CliError> {
    if args.step == 0 {
        return Err(CliError::Input("--step must be at least 1".into()));
    }
    let requested = args.range.as_deref().map(parse_range).transpose()?;
    let resolved = args.source.resolve()?;
    let failures = resolved.failures();
    if !failures.is_empty() {
        return Err(CliError::Fit(format!("fit failed for {}", failures.join("; "))));
    }
    let models = resolved.params();
    let observed_max = resolved.dataset.as_ref().and_then(|d| d.sample.max_value());
    let (first, last) = match (requested, observed_max) {
        (Some(r), _) => r,
        (None, Some(max)) => (1, max),
        (None, None) => {
            let last = models.iter().map(|p| p.quantile(0.99).ceil() as u64).max().unwrap_or(1);
            (1, last.max(1))
        }
    };
    if let Some(max) = observed_max {
        if last > max && !args.extend_range {
            return Err(CliError::Input(format!(
                "--range ends at {last}, past the largest observation {max}; pass --extend-range to allow it"
            )));
        }
    }
    let km = resolved.dataset.as_ref().map(|d| kaplan_meier(&d.sample));
    let mut header = vec!["n".to_string()];
    for p in &models {
        let m = p.model().name();
        header.extend([format!("{m}_cdf"), format!("{m}_survival"), format!("{m}_hazard")]);
    }
    if km.is_some() {
        header.extend(["km_cdf".to_string(), "km_survival".to_string()]);
    }
    let mut out = header.join(",");
    out.push('\n');
    let mut n = first;
    while n <= last {
        let mut row = vec![n.to_string()];
        for p in &models {
            let (cdf, survival, hazard) = point(p, n);
            row.extend([cdf.to_string(), survival.to_string(), hazard.to_string()]);
        }
        if let Some(km) = &km {
            let s = km.survival_at(n);
            row.extend([(1.0 - s).to_string(), s.to_string()]);
        }
        out.push_str(&row.join(","));
        out.push('\n');
        n = match n.checked_add(args.step) {
            Some(next) => next,
            None => break,
        };
    }
    write_text(&out, args.output.as_deref())
}
