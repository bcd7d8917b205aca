//! Lifetime samples and their random generation.
//!
//! Randomness comes from [`SeededStream`], a ChaCha8 generator seeded from a
//! 64-bit value with a 64-bit stream selector. Equal `(seed, stream)` pairs
//! reproduce the same draws bit for bit; distinct streams are independent
//! keystreams of the same cipher.

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{IpdParams, ScaleShape, W1Params, WeibullParams};
use crate::error::DomainError;

/// Hard cap on urn steps before the sampler gives up.
pub const URN_STEP_CAP: u64 = 1_000_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("urn sampler still had {alive} items alive after {steps} solicitations")]
    NonTermination { steps: u64, alive: u64 },
    #[error("censoring expects an uncensored sample")]
    AlreadyCensored,
    #[error("censoring rate {rate} is unattainable: only {max_rate} of the lifetimes exceed 1")]
    RateUnattainable { rate: f64, max_rate: f64 },
    #[error("sample values must be >= 1 (record {index} has 0)")]
    ZeroValue { index: usize },
    #[error("grouped sample has a survivor group with multiplicity 0 at n = {n}")]
    EmptyGroup { n: u64 },
}

/// Seed plus substream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeededStream {
    pub seed: u64,
    pub stream: u64,
}

impl SeededStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    Failure,
    RightCensored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Record {
    pub value: u64,
    pub event: Event,
}

impl Record {
    pub fn failure(value: u64) -> Self {
        Self {
            value,
            event: Event::Failure,
        }
    }

    pub fn censored(value: u64) -> Self {
        Self {
            value,
            event: Event::RightCensored,
        }
    }

    pub fn is_failure(&self) -> bool {
        self.event == Event::Failure
    }
}

/// Flat list of (possibly right-censored) solicitation counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LifetimeSample {
    records: Vec<Record>,
    provenance: Option<String>,
}

impl LifetimeSample {
    pub fn new(records: Vec<Record>) -> Result<Self, SamplingError> {
        if let Some(index) = records.iter().position(|r| r.value == 0) {
            return Err(SamplingError::ZeroValue { index });
        }
        Ok(Self {
            records,
            provenance: None,
        })
    }

    /// Uncensored sample.
    pub fn from_failures<I: IntoIterator<Item = u64>>(values: I) -> Result<Self, SamplingError> {
        Self::new(values.into_iter().map(Record::failure).collect())
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = Some(provenance.into());
        self
    }

    pub fn provenance(&self) -> Option<&str> {
        self.provenance.as_deref()
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn failure_count(&self) -> usize {
        self.records.iter().filter(|r| r.is_failure()).count()
    }

    pub fn censored_count(&self) -> usize {
        self.len() - self.failure_count()
    }

    pub fn sum_observed(&self) -> u64 {
        self.records.iter().map(|r| r.value).sum()
    }

    pub fn max_value(&self) -> Option<u64> {
        self.records.iter().map(|r| r.value).max()
    }

    pub fn is_uncensored(&self) -> bool {
        self.records.iter().all(Record::is_failure)
    }

    /// Survivor multiplicities and failure list.
    pub fn to_grouped(&self) -> GroupedSample {
        let mut censored: Vec<u64> = Vec::new();
        let mut failures: Vec<u64> = Vec::new();
        for r in &self.records {
            match r.event {
                Event::Failure => failures.push(r.value),
                Event::RightCensored => censored.push(r.value),
            }
        }
        censored.sort_unstable();
        failures.sort_unstable();
        let mut survivors: Vec<(u64, u64)> = Vec::new();
        for n in censored {
            match survivors.last_mut() {
                Some((last, k)) if *last == n => *k += 1,
                _ => survivors.push((n, 1)),
            }
        }
        GroupedSample {
            survivors,
            failures,
        }
    }
}

/// Censored data as `k_i` survivors at `n_i` plus the list of failure counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupedSample {
    survivors: Vec<(u64, u64)>,
    failures: Vec<u64>,
}

impl GroupedSample {
    pub fn new(mut survivors: Vec<(u64, u64)>, mut failures: Vec<u64>) -> Result<Self, SamplingError> {
        if let Some(&(n, _)) = survivors.iter().find(|&&(_, k)| k == 0) {
            return Err(SamplingError::EmptyGroup { n });
        }
        if survivors.iter().any(|&(n, _)| n == 0) || failures.iter().any(|&n| n == 0) {
            return Err(SamplingError::ZeroValue { index: 0 });
        }
        survivors.sort_unstable();
        // merge repeated survivor values
        let mut merged: Vec<(u64, u64)> = Vec::with_capacity(survivors.len());
        for (n, k) in survivors {
            match merged.last_mut() {
                Some((last, acc)) if *last == n => *acc += k,
                _ => merged.push((n, k)),
            }
        }
        failures.sort_unstable();
        Ok(Self {
            survivors: merged,
            failures,
        })
    }

    /// `(n_i, k_i)` pairs, sorted by `n_i`, distinct values.
    pub fn survivors(&self) -> &[(u64, u64)] {
        &self.survivors
    }

    /// Failure counts `n_j`, sorted.
    pub fn failures(&self) -> &[u64] {
        &self.failures
    }

    pub fn failure_count(&self) -> u64 {
        self.failures.len() as u64
    }

    pub fn survivor_count(&self) -> u64 {
        self.survivors.iter().map(|&(_, k)| k).sum()
    }

    pub fn len(&self) -> u64 {
        self.failure_count() + self.survivor_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn max_value(&self) -> Option<u64> {
        let s = self.survivors.last().map(|&(n, _)| n);
        let f = self.failures.last().copied();
        s.max(f)
    }

    pub fn to_flat(&self) -> LifetimeSample {
        let mut records = Vec::with_capacity(self.len() as usize);
        for &(n, k) in &self.survivors {
            records.extend(std::iter::repeat_n(Record::censored(n), k as usize));
        }
        records.extend(self.failures.iter().map(|&n| Record::failure(n)));
        LifetimeSample {
            records,
            provenance: None,
        }
    }
}

fn check_count(count: usize) -> Result<(), DomainError> {
    if count == 0 {
        Err(DomainError::parameter("count", 0.0, "at least one draw"))
    } else {
        Ok(())
    }
}

/// Inverse Polya lifetimes from the urn cohort algorithm.
///
/// All `count` items face solicitation `k` together; the number failing is
/// `Binomial(alive, alpha_k)` with `alpha_k` the hazard at `k`, which is the
/// sum of `alive` Bernoulli trials. Output order is shuffled.
pub fn sample_ipd<R: Rng + ?Sized>(
    params: &IpdParams,
    count: usize,
    rng: &mut R,
) -> Result<LifetimeSample, SamplingError> {
    check_count(count)?;
    let mut records = Vec::with_capacity(count);
    let mut alive = count as u64;
    let mut step = 0u64;
    while alive > 0 {
        step += 1;
        if step > URN_STEP_CAP {
            return Err(SamplingError::NonTermination {
                steps: URN_STEP_CAP,
                alive,
            });
        }
        let hazard = params.hazard_at(step);
        let failed = Binomial::new(alive, hazard)
            .expect("hazard lies in [alpha, 1)")
            .sample(rng);
        records.extend(std::iter::repeat_n(Record::failure(step), failed as usize));
        alive -= failed;
    }
    records.shuffle(rng);
    Ok(LifetimeSample {
        records,
        provenance: Some(format!("ipd(alpha={}, zeta={})", params.alpha(), params.zeta())),
    })
}

/// `ceil(T)` for `T` drawn by inversion from the continuous Weibull.
#[inline]
fn discretized_weibull_draw<P: ScaleShape, R: Rng + ?Sized>(params: &P, rng: &mut R) -> u64 {
    // u in (0, 1]
    let u = 1.0 - rng.random::<f64>();
    let t = params.eta() * (-u.ln()).powf(1.0 / params.beta());
    // saturating float-to-int cast
    (t.ceil() as u64).max(1)
}

/// Weibull-1 lifetimes: `P[ceil(T) > n] = exp(-(n/eta)^beta)` exactly.
pub fn sample_w1<R: Rng + ?Sized>(
    params: &W1Params,
    count: usize,
    rng: &mut R,
) -> Result<LifetimeSample, SamplingError> {
    check_count(count)?;
    let records = (0..count)
        .map(|_| Record::failure(discretized_weibull_draw(params, rng)))
        .collect();
    Ok(LifetimeSample {
        records,
        provenance: Some(format!("w1(eta={}, beta={})", params.eta(), params.beta())),
    })
}

/// Continuous Weibull draws rounded up to integers; same law as `W1(eta, beta)`.
pub fn sample_weibull_discretized<R: Rng + ?Sized>(
    params: &WeibullParams,
    count: usize,
    rng: &mut R,
) -> Result<LifetimeSample, SamplingError> {
    check_count(count)?;
    let records = (0..count)
        .map(|_| Record::failure(discretized_weibull_draw(params, rng)))
        .collect();
    Ok(LifetimeSample {
        records,
        provenance: Some(format!(
            "weibull_discretized(eta={}, beta={})",
            params.eta(),
            params.beta()
        )),
    })
}

/// How censored records are chosen and where they are cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensoringScheme {
    /// Each record is censored with probability `rate`, at a value drawn
    /// uniformly on `{1, ..., lifetime}`.
    #[default]
    UniformBelowLifetime,
    /// Exactly `ceil(rate * count)` records, chosen uniformly, each cut
    /// uniformly on `{1, ..., lifetime}`.
    ExactCount,
    /// Censoring times independent of the lifetimes: `C ~ Uniform{1..M}`
    /// (randomized between two adjacent `M`) calibrated so that
    /// `P[C < N]` averaged over the sample equals `rate`. A record is
    /// censored at `C` when `C < N`.
    Independent,
}

fn check_rate(rate: f64) -> Result<(), DomainError> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(DomainError::parameter("rate", rate, "a probability in [0, 1)"))
    }
}

/// Right-censor an uncensored sample.
pub fn apply_censoring<R: Rng + ?Sized>(
    sample: &LifetimeSample,
    rate: f64,
    scheme: CensoringScheme,
    rng: &mut R,
) -> Result<LifetimeSample, SamplingError> {
    apply_censoring_traced(sample, rate, scheme, rng).map(|(censored, _)| censored)
}

/// As [`apply_censoring`], also returning the latent lifetimes record by record.
pub fn apply_censoring_traced<R: Rng + ?Sized>(
    sample: &LifetimeSample,
    rate: f64,
    scheme: CensoringScheme,
    rng: &mut R,
) -> Result<(LifetimeSample, Vec<u64>), SamplingError> {
    check_rate(rate)?;
    if !sample.is_uncensored() {
        return Err(SamplingError::AlreadyCensored);
    }
    let latents: Vec<u64> = sample.records.iter().map(|r| r.value).collect();
    let mut records = sample.records.clone();
    if rate > 0.0 {
        match scheme {
            CensoringScheme::UniformBelowLifetime => {
                for r in records.iter_mut() {
                    if rng.random_bool(rate) {
                        *r = Record::censored(rng.random_range(1..=r.value));
                    }
                }
            }
            CensoringScheme::ExactCount => {
                let amount = ((rate * records.len() as f64).ceil() as usize).min(records.len());
                for i in index::sample(rng, records.len(), amount) {
                    let r = &mut records[i];
                    *r = Record::censored(rng.random_range(1..=r.value));
                }
            }
            CensoringScheme::Independent => {
                let (m, weight_m) = calibrate_uniform_censoring(&latents, rate)?;
                for r in records.iter_mut() {
                    let upper = if rng.random_bool(weight_m) { m } else { m + 1 };
                    let c = rng.random_range(1..=upper);
                    if c < r.value {
                        *r = Record::censored(c);
                    }
                }
            }
        }
    }
    let provenance = sample
        .provenance
        .as_ref()
        .map(|p| format!("{p} + censoring({scheme:?}, rate={rate})"));
    Ok((
        LifetimeSample {
            records,
            provenance,
        },
        latents,
    ))
}

/// Expected censored fraction when `C ~ Uniform{1..m}`.
fn uniform_censoring_fraction(latents: &[u64], m: u64) -> f64 {
    let mf = m as f64;
    let total: f64 = latents
        .iter()
        .map(|&n| ((n - 1).min(m)) as f64 / mf)
        .sum();
    total / latents.len() as f64
}

/// Find `m` and weight `w` so that mixing `Uniform{1..m}` (prob `w`) with
/// `Uniform{1..m+1}` hits `rate` in expectation.
fn calibrate_uniform_censoring(latents: &[u64], rate: f64) -> Result<(u64, f64), SamplingError> {
    let max_rate = uniform_censoring_fraction(latents, 1);
    if rate > max_rate {
        return Err(SamplingError::RateUnattainable { rate, max_rate });
    }
    // fraction is nonincreasing in m; find the last m with fraction >= rate
    let mut lo = 1u64;
    let mut hi = latents.iter().copied().max().unwrap_or(1).max(2);
    if uniform_censoring_fraction(latents, hi) >= rate {
        return Ok((hi, 1.0));
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if uniform_censoring_fraction(latents, mid) >= rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let f_lo = uniform_censoring_fraction(latents, lo);
    let f_next = uniform_censoring_fraction(latents, lo + 1);
    let weight = if f_lo > f_next {
        ((rate - f_next) / (f_lo - f_next)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok((lo, weight))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::DiscreteLifetime;
    use proptest::prelude::{any, prop, prop_assert, prop_assert_eq, proptest, Strategy, TestCaseError};

    fn stream(id: u64) -> ChaCha8Rng {
        SeededStream::new(20_240_601, id).rng()
    }

    fn within_3se(observed: f64, expected: f64, se: f64) -> bool {
        (observed - expected).abs() <= 3.0 * se
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..8).map(|_| stream(1).random()).collect();
        let b: Vec<u64> = (0..8).map(|_| stream(1).random()).collect();
        assert_eq!(a, b);
        let mut r1 = stream(1);
        let mut r2 = stream(2);
        let x: Vec<u64> = (0..8).map(|_| r1.random()).collect();
        let y: Vec<u64> = (0..8).map(|_| r2.random()).collect();
        assert_ne!(x, y);
    }

    #[test]
    fn ipd_geometric_mean() {
        let params = IpdParams::new(0.5, 0.0).unwrap();
        let sample = sample_ipd(&params, 100_000, &mut stream(3)).unwrap();
        let n = sample.len() as f64;
        let values: Vec<f64> = sample.records().iter().map(|r| r.value as f64).collect();
        let mean = values.iter().sum::<f64>() / n;
        // Var = (1 - alpha) / alpha^2 = 2
        assert!(within_3se(mean, 2.0, (2.0f64 / n).sqrt()), "mean {mean}");
    }

    #[test]
    fn ipd_first_solicitation_frequency() {
        let params = IpdParams::new(0.3, 0.01).unwrap();
        let sample = sample_ipd(&params, 100_000, &mut stream(4)).unwrap();
        let n = sample.len() as f64;
        let ones = sample.records().iter().filter(|r| r.value == 1).count() as f64;
        assert!(within_3se(ones / n, 0.3, (0.3f64 * 0.7 / n).sqrt()));
    }

    #[test]
    fn w1_first_solicitation_and_degenerate_mass() {
        let params = W1Params::new(10.0, 1.0).unwrap();
        let sample = sample_w1(&params, 100_000, &mut stream(5)).unwrap();
        let p1 = 1.0 - (-0.1f64).exp();
        let n = sample.len() as f64;
        let ones = sample.records().iter().filter(|r| r.value == 1).count() as f64;
        assert!(within_3se(ones / n, p1, (p1 * (1.0 - p1) / n).sqrt()));

        let spike = W1Params::new(0.9, 60.0).unwrap();
        let s = sample_w1(&spike, 1000, &mut stream(6)).unwrap();
        assert!(s.records().iter().all(|r| r.value == 1));
    }

    #[test]
    fn w1_mean_matches_series_mttf() {
        let params = W1Params::new(300.0, 2.3).unwrap();
        let sample = sample_w1(&params, 100_000, &mut stream(7)).unwrap();
        let values: Vec<f64> = sample.records().iter().map(|r| r.value as f64).collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(within_3se(mean, params.mttf(), (var / n).sqrt()));
    }

    #[test]
    fn discretized_weibull_shape_checks() {
        let exp = WeibullParams::new(10.0, 1.0).unwrap();
        let s = sample_weibull_discretized(&exp, 10_000, &mut stream(8)).unwrap();
        let n = s.len() as f64;
        let frac = s.records().iter().filter(|r| r.value > 10).count() as f64 / n;
        let target = (-1f64).exp();
        assert!(within_3se(frac, target, (target * (1.0 - target) / n).sqrt()));

        let heavy = WeibullParams::new(100.0, 0.5).unwrap();
        let s = sample_weibull_discretized(&heavy, 10_000, &mut stream(9)).unwrap();
        assert!(s.max_value().unwrap() > 2_000);
    }

    #[test]
    fn censoring_rate_zero_is_identity() {
        let sample = LifetimeSample::from_failures([3, 1, 4, 1, 5]).unwrap();
        for scheme in [
            CensoringScheme::UniformBelowLifetime,
            CensoringScheme::ExactCount,
            CensoringScheme::Independent,
        ] {
            let out = apply_censoring(&sample, 0.0, scheme, &mut stream(10)).unwrap();
            assert_eq!(out.records(), sample.records());
        }
    }

    #[test]
    fn censoring_rate_concentrates() {
        let params = W1Params::new(50.0, 1.5).unwrap();
        let sample = sample_w1(&params, 10_000, &mut stream(11)).unwrap();
        let out = apply_censoring(&sample, 0.5, CensoringScheme::default(), &mut stream(12)).unwrap();
        let frac = out.censored_count() as f64 / out.len() as f64;
        assert!((0.48..=0.52).contains(&frac), "{frac}");

        let exact = apply_censoring(&sample, 0.25, CensoringScheme::ExactCount, &mut stream(13)).unwrap();
        assert_eq!(exact.censored_count(), 2500);

        let indep = apply_censoring(&sample, 0.5, CensoringScheme::Independent, &mut stream(14)).unwrap();
        let frac = indep.censored_count() as f64 / indep.len() as f64;
        assert!((0.48..=0.52).contains(&frac), "{frac}");
    }

    #[test]
    fn censoring_all_ones_stays_at_one() {
        let sample = LifetimeSample::from_failures(vec![1; 400]).unwrap();
        let out = apply_censoring(&sample, 0.25, CensoringScheme::default(), &mut stream(15)).unwrap();
        assert!(out.censored_count() > 0);
        assert!(out.records().iter().all(|r| r.value == 1));
        let err = apply_censoring(&sample, 0.25, CensoringScheme::Independent, &mut stream(15));
        assert!(matches!(err, Err(SamplingError::RateUnattainable { .. })));
    }

    #[test]
    fn censoring_rejects_bad_input() {
        let sample = LifetimeSample::from_failures([2, 3]).unwrap();
        assert!(apply_censoring(&sample, 1.0, CensoringScheme::default(), &mut stream(16)).is_err());
        assert!(apply_censoring(&sample, -0.1, CensoringScheme::default(), &mut stream(16)).is_err());
        let censored = LifetimeSample::new(vec![Record::censored(2)]).unwrap();
        assert_eq!(
            apply_censoring(&censored, 0.1, CensoringScheme::default(), &mut stream(16)),
            Err(SamplingError::AlreadyCensored)
        );
    }

    #[test]
    fn zero_values_and_counts_rejected() {
        assert!(LifetimeSample::from_failures([1, 0]).is_err());
        assert!(GroupedSample::new(vec![(3, 0)], vec![1]).is_err());
        let ipd = IpdParams::new(0.2, 0.0).unwrap();
        assert!(sample_ipd(&ipd, 0, &mut stream(17)).is_err());
    }

    fn arb_sample() -> impl Strategy<Value = LifetimeSample> {
        prop::collection::vec((1u64..60, any::<bool>()), 1..80).prop_map(|v| {
            LifetimeSample::new(
                v.into_iter()
                    .map(|(n, f)| if f { Record::failure(n) } else { Record::censored(n) })
                    .collect(),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn grouped_round_trip_preserves_multiset(sample in arb_sample()) {
            let back = sample.to_grouped().to_flat();
            let mut a = sample.records().to_vec();
            let mut b = back.records().to_vec();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn censored_values_never_exceed_latents(
            seed in any::<u64>(),
            rate in 0.0f64..0.95,
            scheme_id in 0usize..3,
        ) {
            let scheme = [
                CensoringScheme::UniformBelowLifetime,
                CensoringScheme::ExactCount,
                CensoringScheme::Independent,
            ][scheme_id];
            let mut rng = SeededStream::new(seed, 0).rng();
            let params = W1Params::new(20.0, 1.3).unwrap();
            let sample = sample_w1(&params, 200, &mut rng).unwrap();
            match apply_censoring_traced(&sample, rate, scheme, &mut rng) {
                Ok((out, latents)) => {
                    for (r, &latent) in out.records().iter().zip(&latents) {
                        prop_assert!(r.value >= 1 && r.value <= latent);
                        if r.is_failure() {
                            prop_assert_eq!(r.value, latent);
                        }
                    }
                }
                Err(SamplingError::RateUnattainable { .. }) => {}
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
        }

        #[test]
        fn sampling_is_deterministic(seed in any::<u64>(), stream_id in any::<u64>()) {
            let params = IpdParams::new(0.05, 0.01).unwrap();
            let a = sample_ipd(&params, 50, &mut SeededStream::new(seed, stream_id).rng()).unwrap();
            let b = sample_ipd(&params, 50, &mut SeededStream::new(seed, stream_id).rng()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
