use super::{is_ascent, newton_direction, wald_stderr, FitConfig, FitError, FitResult, FittedParams, Mat2, ModelKind};
use crate::distributions::{CompensatedSum, ScaleShape, W1Params, WeibullParams};
use crate::sampling::{Event, LifetimeSample};

const PROFILE_BETA: (f64, f64) = (0.05, 50.0);
const PROFILE_POINTS: usize = 81;
const BETA_RANGE: (f64, f64) = (1e-3, 1e3);
const ETA_RANGE: (f64, f64) = (1e-10, 1e15);
const MAX_HALVINGS: u32 = 60;
/// Largest move per iteration in either log coordinate.
const MAX_LOG_STEP: f64 = 1.0;
const FD_STEP: f64 = 1e-5;

/// Log-survival contribution of a right-censored record, shared by both laws.
#[inline]
fn censored_term<P: ScaleShape>(params: &P, n: u64) -> f64 {
    -params.cumulative_hazard(n as f64)
}

/// Sum of `ln pmf` over failures and `ln S` over censored records.
pub fn w1_log_likelihood(sample: &LifetimeSample, params: &W1Params) -> f64 {
    let mut acc = CompensatedSum::default();
    for r in sample.records() {
        acc.add(match r.event {
            Event::Failure => params.log_pmf_at(r.value),
            Event::RightCensored => censored_term(params, r.value),
        });
    }
    acc.value()
}

/// Sum of `ln f(n)` over failures (values read as continuous times) and
/// `ln S(n)` over censored records.
pub fn weibull_log_likelihood(sample: &LifetimeSample, params: &WeibullParams) -> f64 {
    let mut acc = CompensatedSum::default();
    for r in sample.records() {
        acc.add(match r.event {
            Event::Failure => params.log_density_at(r.value as f64),
            Event::RightCensored => censored_term(params, r.value),
        });
    }
    acc.value()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Law {
    Discrete,
    Continuous,
}

/// Log-likelihood in `(u, v) = (ln eta, ln beta)` over distinct values.
struct Objective {
    law: Law,
    failures: Vec<(u64, f64)>,
    censors: Vec<(u64, f64)>,
    failure_count: f64,
}

fn tally(mut values: Vec<u64>) -> Vec<(u64, f64)> {
    values.sort_unstable();
    let mut out: Vec<(u64, f64)> = Vec::new();
    for n in values {
        match out.last_mut() {
            Some((last, c)) if *last == n => *c += 1.0,
            _ => out.push((n, 1.0)),
        }
    }
    out
}

impl Objective {
    fn new(sample: &LifetimeSample, law: Law) -> Self {
        let (mut f, mut c) = (Vec::new(), Vec::new());
        for r in sample.records() {
            match r.event {
                Event::Failure => f.push(r.value),
                Event::RightCensored => c.push(r.value),
            }
        }
        let failure_count = f.len() as f64;
        Self {
            law,
            failures: tally(f),
            censors: tally(c),
            failure_count,
        }
    }

    fn value(&self, u: f64, v: f64) -> f64 {
        let (eta, beta) = (u.exp(), v.exp());
        let mut acc = CompensatedSum::default();
        match self.law {
            Law::Discrete => {
                let p = W1Params::unchecked(eta, beta);
                for &(n, c) in &self.failures {
                    acc.add(c * p.log_pmf_at(n));
                }
                for &(n, m) in &self.censors {
                    acc.add(m * censored_term(&p, n));
                }
            }
            Law::Continuous => {
                let p = WeibullParams::unchecked(eta, beta);
                for &(n, c) in &self.failures {
                    acc.add(c * p.log_density_at(n as f64));
                }
                for &(n, m) in &self.censors {
                    acc.add(m * censored_term(&p, n));
                }
            }
        }
        let value = acc.value();
        if value.is_nan() {
            f64::NEG_INFINITY
        } else {
            value
        }
    }

    fn gradient(&self, u: f64, v: f64) -> [f64; 2] {
        let beta = v.exp();
        let z = |n: u64| (beta * ((n as f64).ln() - u)).exp();
        let mut gu = CompensatedSum::default();
        let mut gv = CompensatedSum::default();
        match self.law {
            Law::Discrete => {
                let p = W1Params::unchecked(u.exp(), beta);
                for &(n, c) in &self.failures {
                    let delta = p.hazard_increment(n);
                    let e = delta.exp_m1();
                    // delta / (e^delta - 1) and the companion 1 / (e^delta - 1)
                    let (ratio, inv) = if e.is_infinite() {
                        (0.0, 0.0)
                    } else if delta == 0.0 {
                        (1.0, f64::INFINITY)
                    } else {
                        (delta / e, 1.0 / e)
                    };
                    let log_n = (n as f64).ln() - u;
                    if n == 1 {
                        gu.add(c * -beta * ratio);
                        gv.add(c * beta * ratio * log_n);
                    } else {
                        let z_prev = z(n - 1);
                        let log_prev = ((n - 1) as f64).ln() - u;
                        // z(n) ln(n/eta) - z(n-1) ln((n-1)/eta), split to avoid cancellation
                        let tilt = -(-1.0 / n as f64).ln_1p();
                        let tail = if z_prev == 0.0 { 0.0 } else { z_prev * tilt * inv };
                        gu.add(c * beta * (z_prev - ratio));
                        gv.add(c * beta * (-z_prev * log_prev + ratio * log_n + tail));
                    }
                }
            }
            Law::Continuous => {
                for &(n, c) in &self.failures {
                    let x = (n as f64).ln() - u;
                    let zn = (beta * x).exp();
                    gu.add(c * beta * (zn - 1.0));
                    gv.add(c * (1.0 + beta * x * (1.0 - zn)));
                }
            }
        }
        for &(n, m) in &self.censors {
            let x = (n as f64).ln() - u;
            let zn = (beta * x).exp();
            gu.add(m * beta * zn);
            gv.add(-m * beta * x * zn);
        }
        [gu.value(), gv.value()]
    }

    /// Central differences of the analytic gradient, symmetrized.
    fn hessian(&self, u: f64, v: f64) -> Mat2 {
        let h = FD_STEP;
        let gu_plus = self.gradient(u + h, v);
        let gu_minus = self.gradient(u - h, v);
        let gv_plus = self.gradient(u, v + h);
        let gv_minus = self.gradient(u, v - h);
        let huu = (gu_plus[0] - gu_minus[0]) / (2.0 * h);
        let hvv = (gv_plus[1] - gv_minus[1]) / (2.0 * h);
        let huv = 0.5 * ((gu_plus[1] - gu_minus[1]) + (gv_plus[0] - gv_minus[0])) / (2.0 * h);
        [[huu, huv], [huv, hvv]]
    }

    /// Best point of a 1-D scan over `beta` with `eta` at its continuous
    /// profile maximizer `(sum_records t^beta / r)^(1/beta)`.
    fn profile_start(&self) -> (f64, f64, f64) {
        let step = (PROFILE_BETA.1 / PROFILE_BETA.0).ln() / (PROFILE_POINTS - 1) as f64;
        let mut best = (0.0, 0.0, f64::NEG_INFINITY);
        for k in 0..PROFILE_POINTS {
            let v = PROFILE_BETA.0.ln() + step * k as f64;
            let beta = v.exp();
            let terms = self.failures.iter().chain(&self.censors);
            let max_log = terms.clone().map(|&(n, _)| beta * (n as f64).ln()).fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = terms.map(|&(n, m)| m * (beta * (n as f64).ln() - max_log).exp()).sum();
            let u = (max_log + sum.ln() - self.failure_count.ln()) / beta;
            let ll = self.value(u, v);
            if ll > best.2 {
                best = (u, v, ll);
            }
        }
        best
    }
}

fn norm(g: [f64; 2]) -> f64 {
    g[0].hypot(g[1])
}

fn limit_step(mut dir: [f64; 2]) -> [f64; 2] {
    let largest = dir[0].abs().max(dir[1].abs());
    if largest > MAX_LOG_STEP {
        let s = MAX_LOG_STEP / largest;
        dir[0] *= s;
        dir[1] *= s;
    }
    dir
}

fn line_search(obj: &Objective, x: [f64; 2], ll: f64, dir: [f64; 2]) -> Option<([f64; 2], f64)> {
    let dir = limit_step(dir);
    let mut t = 1.0;
    for _ in 0..=MAX_HALVINGS {
        let trial = [x[0] + t * dir[0], x[1] + t * dir[1]];
        let value = obj.value(trial[0], trial[1]);
        if is_ascent(value, ll) {
            return Some((trial, value));
        }
        t *= 0.5;
    }
    None
}

fn in_range(x: [f64; 2]) -> bool {
    let (eta, beta) = (x[0].exp(), x[1].exp());
    (ETA_RANGE.0..=ETA_RANGE.1).contains(&eta) && (BETA_RANGE.0..=BETA_RANGE.1).contains(&beta)
}

fn fit_scale_shape(sample: &LifetimeSample, config: &FitConfig, law: Law) -> Result<FitResult, FitError> {
    if sample.is_empty() {
        return Err(FitError::EmptySample);
    }
    if sample.failure_count() == 0 {
        return Err(FitError::AllCensored);
    }
    let first = sample.records()[0].value;
    if sample.records().iter().all(|r| r.value == first) {
        return Err(FitError::DegenerateSample { value: first });
    }
    let obj = Objective::new(sample, law);
    let (u0, v0, ll0) = obj.profile_start();
    let mut x = [u0, v0];
    let mut ll = ll0;
    let mut trace = vec![ll];
    let model = match law {
        Law::Discrete => ModelKind::W1,
        Law::Continuous => ModelKind::Weibull,
    };
    let snapshot = |x: [f64; 2], ll: f64, h: &Mat2, g: [f64; 2], iterations: usize, converged: bool, trace: &[f64]| {
        let (eta, beta) = (x[0].exp(), x[1].exp());
        let params = match law {
            Law::Discrete => FittedParams::W1(W1Params::new(eta, beta).unwrap_or(W1Params::unchecked(eta, beta))),
            Law::Continuous => FittedParams::Weibull(WeibullParams::unchecked(eta, beta)),
        };
        FitResult {
            model,
            params,
            log_likelihood: ll,
            initial_log_likelihood: ll0,
            converged,
            iterations,
            score_norm: norm(g),
            stderr_estimates: wald_stderr(h).map(|[su, sv]| [eta * su, beta * sv]),
            trace: trace.to_vec(),
        }
    };
    for iteration in 0..=config.max_iterations {
        let g = obj.gradient(x[0], x[1]);
        let h = obj.hessian(x[0], x[1]);
        if norm(g) < config.tol {
            return Ok(snapshot(x, ll, &h, g, iteration, true, &trace));
        }
        if iteration == config.max_iterations {
            return Err(FitError::MaxIterationsExceeded {
                iterations: iteration,
                last: Box::new(snapshot(x, ll, &h, g, iteration, false, &trace)),
            });
        }
        let newton = newton_direction(&h, g);
        let scaled = |gi: f64, hii: f64| if hii.abs() > 0.0 && hii.is_finite() { gi / hii.abs() } else { gi };
        let gradient_dir = [scaled(g[0], h[0][0]), scaled(g[1], h[1][1])];
        let next = newton
            .and_then(|dir| line_search(&obj, x, ll, dir))
            .or_else(|| line_search(&obj, x, ll, gradient_dir));
        match next {
            Some((trial, value)) => {
                x = trial;
                ll = value;
                trace.push(ll);
                if !in_range(x) {
                    return Err(FitError::Divergent {
                        iterations: iteration + 1,
                        last: Box::new(snapshot(x, ll, &h, g, iteration + 1, false, &trace)),
                    });
                }
            }
            None => {
                let last = Box::new(snapshot(x, ll, &h, g, iteration, false, &trace));
                return Err(if newton.is_none() {
                    FitError::NonInvertibleHessian { iterations: iteration, last }
                } else {
                    FitError::LineSearchFailed { iterations: iteration, last }
                });
            }
        }
    }
    unreachable!("loop returns at max_iterations")
}

/// Weibull-1 maximum likelihood by Newton ascent in `(ln eta, ln beta)`.
///
/// Converged when the Euclidean norm of the gradient in those coordinates
/// is below `config.tol`.
pub fn fit_w1(sample: &LifetimeSample, config: &FitConfig) -> Result<FitResult, FitError> {
    fit_scale_shape(sample, config, Law::Discrete)
}

/// Continuous Weibull maximum likelihood on the integer values read as times.
pub fn fit_weibull(sample: &LifetimeSample, config: &FitConfig) -> Result<FitResult, FitError> {
    fit_scale_shape(sample, config, Law::Continuous)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::DiscreteLifetime;
    use crate::sampling::{apply_censoring, sample_w1, sample_weibull_discretized, CensoringScheme, Record, SeededStream};

    fn mixed() -> LifetimeSample {
        LifetimeSample::new(vec![
            Record::failure(1),
            Record::failure(3),
            Record::failure(3),
            Record::failure(17),
            Record::censored(2),
            Record::censored(40),
            Record::failure(120),
        ])
        .unwrap()
    }

    #[test]
    fn single_record_examples() {
        let params = W1Params::new(7.0, 1.8).unwrap();
        let one = LifetimeSample::from_failures([1]).unwrap();
        assert!((w1_log_likelihood(&one, &params) - (1.0 - params.theta()).ln()).abs() < 1e-15);
        let censor = LifetimeSample::new(vec![Record::censored(9)]).unwrap();
        let expected = -(9.0f64 / 7.0).powf(1.8);
        assert!((w1_log_likelihood(&censor, &params) - expected).abs() < 1e-14);
    }

    #[test]
    fn censored_only_likelihoods_coincide() {
        let sample = LifetimeSample::new((1..30).map(|n| Record::censored(n * 7)).collect()).unwrap();
        for &(eta, beta) in &[(10.0, 0.5), (300.0, 2.3), (1000.0, 10.0)] {
            let w1 = w1_log_likelihood(&sample, &W1Params::new(eta, beta).unwrap());
            let w = weibull_log_likelihood(&sample, &WeibullParams::new(eta, beta).unwrap());
            assert_eq!(w1, w);
        }
    }

    #[test]
    fn grouped_objective_matches_public_likelihood() {
        let sample = mixed();
        for &(eta, beta) in &[(10.0, 0.7), (50.0, 1.0), (30.0, 2.5)] {
            let (u, v) = (f64::ln(eta), f64::ln(beta));
            let d = Objective::new(&sample, Law::Discrete).value(u, v);
            let c = Objective::new(&sample, Law::Continuous).value(u, v);
            let w1 = w1_log_likelihood(&sample, &W1Params::new(eta, beta).unwrap());
            let w = weibull_log_likelihood(&sample, &WeibullParams::new(eta, beta).unwrap());
            assert!((d - w1).abs() < 1e-12 * w1.abs());
            assert!((c - w).abs() < 1e-12 * w.abs());
        }
    }

    #[test]
    fn per_record_oracle_for_w1() {
        let sample = mixed();
        let params = W1Params::new(25.0, 1.4).unwrap();
        let naive: f64 = sample
            .records()
            .iter()
            .map(|r| {
                if r.is_failure() {
                    (params.survival(r.value - 1) - params.survival(r.value)).ln()
                } else {
                    params.survival(r.value).ln()
                }
            })
            .sum();
        assert!((w1_log_likelihood(&sample, &params) - naive).abs() < 1e-10);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let sample = mixed();
        for law in [Law::Discrete, Law::Continuous] {
            let obj = Objective::new(&sample, law);
            for &(eta, beta) in &[(10.0, 0.7), (50.0, 1.0), (30.0, 2.5), (4000.0, 1.3), (2.0, 6.0)] {
                let (u, v) = (f64::ln(eta), f64::ln(beta));
                let g = obj.gradient(u, v);
                let h = 1e-6;
                let gu = (obj.value(u + h, v) - obj.value(u - h, v)) / (2.0 * h);
                let gv = (obj.value(u, v + h) - obj.value(u, v - h)) / (2.0 * h);
                assert!((g[0] - gu).abs() < 1e-6 * gu.abs().max(1.0), "{law:?} {eta} {beta}: {} vs {gu}", g[0]);
                assert!((g[1] - gv).abs() < 1e-6 * gv.abs().max(1.0), "{law:?} {eta} {beta}: {} vs {gv}", g[1]);
            }
        }
    }

    #[test]
    fn degenerate_and_censored_samples() {
        let same = LifetimeSample::from_failures(vec![4; 20]).unwrap();
        assert_eq!(fit_w1(&same, &FitConfig::default()), Err(FitError::DegenerateSample { value: 4 }));
        let single = LifetimeSample::from_failures([12]).unwrap();
        assert!(matches!(fit_weibull(&single, &FitConfig::default()), Err(FitError::DegenerateSample { .. })));
        let censored = LifetimeSample::new(vec![Record::censored(3), Record::censored(5)]).unwrap();
        assert_eq!(fit_w1(&censored, &FitConfig::default()), Err(FitError::AllCensored));
    }

    #[test]
    fn w1_recovery_uncensored() {
        let truth = W1Params::new(300.0, 2.3).unwrap();
        let sample = sample_w1(&truth, 10_000, &mut SeededStream::new(21, 0).rng()).unwrap();
        let fit = fit_w1(&sample, &FitConfig::default()).unwrap();
        let (eta, beta) = fit.params.pair();
        assert!(fit.converged && fit.score_norm < 1e-8);
        assert!((eta / 300.0 - 1.0).abs() < 0.05, "eta {eta}");
        assert!((beta / 2.3 - 1.0).abs() < 0.05, "beta {beta}");
        for w in fit.trace.windows(2) {
            assert!(is_ascent(w[1], w[0]));
        }
        assert!(fit.stderr_estimates.is_some());
    }

    #[test]
    fn w1_recovery_independent_censoring() {
        let truth = W1Params::new(50.0, 1.0).unwrap();
        let mut rng = SeededStream::new(22, 0).rng();
        let sample = sample_w1(&truth, 10_000, &mut rng).unwrap();
        let censored = apply_censoring(&sample, 0.5, CensoringScheme::Independent, &mut rng).unwrap();
        let fit = fit_w1(&censored, &FitConfig::default()).unwrap();
        let (_, beta) = fit.params.pair();
        assert!((beta - 1.0).abs() < 0.1, "beta {beta}");
    }

    #[test]
    fn exponential_recovery_for_continuous_fit() {
        let truth = WeibullParams::new(100.0, 1.0).unwrap();
        let sample = sample_weibull_discretized(&truth, 10_000, &mut SeededStream::new(23, 0).rng()).unwrap();
        let fit = fit_weibull(&sample, &FitConfig::default()).unwrap();
        let (eta, beta) = fit.params.pair();
        assert!((beta - 1.0).abs() < 0.05, "beta {beta}");
        assert!((eta - 100.0).abs() < 5.0, "eta {eta}");
    }

    #[test]
    fn heavy_censoring_brings_fits_together() {
        let truth = W1Params::new(300.0, 2.3).unwrap();
        let mut rng = SeededStream::new(24, 0).rng();
        let sample = sample_w1(&truth, 2000, &mut rng).unwrap();
        let censored = apply_censoring(&sample, 0.8, CensoringScheme::default(), &mut rng).unwrap();
        let a = fit_w1(&censored, &FitConfig::default()).unwrap();
        let b = fit_weibull(&censored, &FitConfig::default()).unwrap();
        let (ea, ba) = a.params.pair();
        let (eb, bb) = b.params.pair();
        assert!(((eb - ea) / ea).abs() < 0.05, "{ea} vs {eb}");
        assert!(((bb - ba) / ba).abs() < 0.05, "{ba} vs {bb}");
        assert!((a.derived().mttf - a.params.mttf()).abs() == 0.0);
    }
}
