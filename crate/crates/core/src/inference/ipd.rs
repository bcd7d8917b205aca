use serde::Serialize;

use super::{is_ascent, newton_direction, wald_stderr, FitConfig, FitError, FitResult, FittedParams, Mat2, ModelKind};
use crate::distributions::special::ln_rising_product;
use crate::distributions::{CompensatedSum, IpdParams};
use crate::sampling::GroupedSample;

/// Lower bound of `alpha` in the optimizer box `[EPS, 1 - EPS]`.
const EPS: f64 = 1e-12;
const GRID_ALPHA: (f64, f64) = (1e-8, 0.5);
const GRID_ZETA: (f64, f64) = (1e-12, 10.0);
const MAX_HALVINGS: u32 = 60;

/// Sufficient counts of a grouped sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IpdLikelihoodStats {
    /// Distinct survivor values.
    pub s: usize,
    /// Failures.
    pub r: u64,
    /// `sum k_i n_i + sum n_j - r`, the exponent of `1 - alpha`.
    pub a: u64,
    /// `sum k_i + r`.
    pub mu: u64,
}

impl IpdLikelihoodStats {
    pub fn from_sample(sample: &GroupedSample) -> Self {
        let r = sample.failure_count();
        let survivor_sum: u64 = sample.survivors().iter().map(|&(n, k)| n * k).sum();
        let failure_sum: u64 = sample.failures().iter().sum();
        Self {
            s: sample.survivors().len(),
            r,
            a: survivor_sum + failure_sum - r,
            mu: sample.survivor_count() + r,
        }
    }
}

/// Score and Hessian of the IPD log-likelihood in `(alpha, zeta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpdDerivatives {
    pub score: [f64; 2],
    pub hessian: Mat2,
    /// `|P - N| / (P + N)` for each score equation written as `P = N`
    /// with `P, N >= 0`.
    pub relative_residuals: [f64; 2],
}

/// IPD log-likelihood of a fixed grouped sample.
///
/// With `a_j = alpha + (n_j - 1) zeta`:
/// `l = A ln(1 - alpha) + sum_j ln a_j - sum_records sum_{i<n} ln(1 + i zeta)`.
/// The last double sum is evaluated per distinct value through log-Gamma
/// ratios; its derivatives use the at-risk counts `R(i)` (records with value
/// `> i`), which avoids the cancellation of digamma differences at small
/// `zeta`.
#[derive(Debug, Clone)]
pub struct IpdObjective {
    stats: IpdLikelihoodStats,
    /// Distinct failure values with multiplicities.
    failures: Vec<(u64, f64)>,
    /// Distinct values over all records with multiplicities.
    records: Vec<(u64, f64)>,
    /// `(first i, last i, R(i))` runs with constant at-risk count.
    risk_runs: Vec<(u64, u64, f64)>,
}

fn collapse(mut values: Vec<(u64, u64)>) -> Vec<(u64, f64)> {
    values.sort_unstable();
    let mut out: Vec<(u64, f64)> = Vec::new();
    for (n, k) in values {
        match out.last_mut() {
            Some((last, acc)) if *last == n => *acc += k as f64,
            _ => out.push((n, k as f64)),
        }
    }
    out
}

impl IpdObjective {
    pub fn new(sample: &GroupedSample) -> Self {
        let failures = collapse(sample.failures().iter().map(|&n| (n, 1)).collect());
        let mut all: Vec<(u64, u64)> = sample.survivors().to_vec();
        all.extend(sample.failures().iter().map(|&n| (n, 1)));
        let records = collapse(all);
        let mut remaining: f64 = records.iter().map(|&(_, m)| m).sum();
        let mut risk_runs = Vec::new();
        let mut start = 1u64;
        for &(n, m) in &records {
            if n > start {
                risk_runs.push((start, n - 1, remaining));
            }
            start = start.max(n);
            remaining -= m;
        }
        Self {
            stats: IpdLikelihoodStats::from_sample(sample),
            failures,
            records,
            risk_runs,
        }
    }

    pub fn stats(&self) -> IpdLikelihoodStats {
        self.stats
    }

    fn failure_term(&self, alpha: f64, zeta: f64) -> f64 {
        let mut acc = CompensatedSum::default();
        for &(n, c) in &self.failures {
            acc.add(c * (alpha + (n - 1) as f64 * zeta).ln());
        }
        acc.value()
    }

    /// `sum_records ln prod_{i<n} (1 + i zeta)`.
    fn denominator_term(&self, zeta: f64) -> f64 {
        let mut acc = CompensatedSum::default();
        for &(n, m) in &self.records {
            acc.add(m * ln_rising_product(n, zeta));
        }
        acc.value()
    }

    /// Log-likelihood; `-inf` outside `0 < alpha < 1`, `zeta >= 0`.
    pub fn log_likelihood(&self, alpha: f64, zeta: f64) -> f64 {
        if !(alpha > 0.0 && alpha < 1.0) || !(zeta >= 0.0) || !zeta.is_finite() {
            return f64::NEG_INFINITY;
        }
        self.stats.a as f64 * (-alpha).ln_1p() + self.failure_term(alpha, zeta)
            - self.denominator_term(zeta)
    }

    pub fn derivatives(&self, alpha: f64, zeta: f64) -> IpdDerivatives {
        let mut f_inv = CompensatedSum::default();
        let mut f_lag = CompensatedSum::default();
        let mut f_inv2 = CompensatedSum::default();
        let mut f_lag2 = CompensatedSum::default();
        let mut f_lag_sq2 = CompensatedSum::default();
        for &(n, c) in &self.failures {
            let lag = (n - 1) as f64;
            let a = alpha + lag * zeta;
            let inv = 1.0 / a;
            f_inv.add(c * inv);
            f_lag.add(c * lag * inv);
            f_inv2.add(c * inv * inv);
            f_lag2.add(c * lag * inv * inv);
            f_lag_sq2.add(c * lag * lag * inv * inv);
        }
        let mut r_first = CompensatedSum::default();
        let mut r_second = CompensatedSum::default();
        for &(lo, hi, risk) in &self.risk_runs {
            let mut first = CompensatedSum::default();
            let mut second = CompensatedSum::default();
            for i in lo..=hi {
                let x = i as f64;
                let w = x / (1.0 + x * zeta);
                first.add(w);
                second.add(w * w);
            }
            r_first.add(risk * first.value());
            r_second.add(risk * second.value());
        }
        let one_minus = 1.0 - alpha;
        let a_total = self.stats.a as f64;
        let alpha_pos = f_inv.value();
        let alpha_neg = a_total / one_minus;
        let zeta_pos = f_lag.value();
        let zeta_neg = r_first.value();
        let score = [alpha_pos - alpha_neg, zeta_pos - zeta_neg];
        let h_aa = -a_total / (one_minus * one_minus) - f_inv2.value();
        let h_az = -f_lag2.value();
        let h_zz = -f_lag_sq2.value() + r_second.value();
        let relative = |p: f64, n: f64| {
            if p + n > 0.0 {
                (p - n).abs() / (p + n)
            } else {
                0.0
            }
        };
        IpdDerivatives {
            score,
            hessian: [[h_aa, h_az], [h_az, h_zz]],
            relative_residuals: [relative(alpha_pos, alpha_neg), relative(zeta_pos, zeta_neg)],
        }
    }

    /// Argmax over a `size x size` log-spaced grid, ties broken toward the
    /// lexicographically smallest `(alpha, zeta)`.
    pub fn grid_argmax(&self, size: usize) -> (f64, f64, f64) {
        let size = size.max(2);
        let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
            let step = (hi / lo).ln() / (size - 1) as f64;
            (0..size).map(|k| lo * (step * k as f64).exp()).collect()
        };
        let alphas = axis(GRID_ALPHA);
        let zetas = axis(GRID_ZETA);
        let denominators: Vec<f64> = zetas.iter().map(|&z| self.denominator_term(z)).collect();
        let mut best = (alphas[0], zetas[0], f64::NEG_INFINITY);
        for &alpha in &alphas {
            let base = self.stats.a as f64 * (-alpha).ln_1p();
            for (&zeta, &den) in zetas.iter().zip(&denominators) {
                let ll = base + self.failure_term(alpha, zeta) - den;
                if ll > best.2 {
                    best = (alpha, zeta, ll);
                }
            }
        }
        best
    }
}

/// Log-likelihood of a grouped sample under `params`.
pub fn ipd_log_likelihood(sample: &GroupedSample, params: &IpdParams) -> f64 {
    IpdObjective::new(sample).log_likelihood(params.alpha(), params.zeta())
}

struct Iterate {
    alpha: f64,
    zeta: f64,
    ll: f64,
}

fn boundary_activity(it: &Iterate, score: [f64; 2]) -> (bool, bool) {
    let alpha_active = (it.alpha <= EPS && score[0] < 0.0) || (it.alpha >= 1.0 - EPS && score[0] > 0.0);
    let zeta_active = it.zeta == 0.0 && score[1] <= 0.0;
    (alpha_active, zeta_active)
}

/// Diagonally scaled gradient step.
fn gradient_direction(d: &IpdDerivatives, active: (bool, bool)) -> [f64; 2] {
    let scaled = |g: f64, h: f64| if h.abs() > 0.0 && h.is_finite() { g / h.abs() } else { g };
    [
        if active.0 { 0.0 } else { scaled(d.score[0], d.hessian[0][0]) },
        if active.1 { 0.0 } else { scaled(d.score[1], d.hessian[1][1]) },
    ]
}

fn newton_step(it: &Iterate, d: &IpdDerivatives, active: (bool, bool)) -> Option<[f64; 2]> {
    let h = &d.hessian;
    match active {
        (false, false) => {
            let dir = newton_direction(h, d.score)?;
            let alpha_blocked = (it.alpha <= EPS && dir[0] < 0.0) || (it.alpha >= 1.0 - EPS && dir[0] > 0.0);
            let zeta_blocked = it.zeta == 0.0 && dir[1] < 0.0;
            match (alpha_blocked, zeta_blocked) {
                (false, false) => Some(dir),
                blocked => newton_step(it, d, blocked),
            }
        }
        (false, true) => (h[0][0] < 0.0).then(|| [-d.score[0] / h[0][0], 0.0]),
        (true, false) => (h[1][1] < 0.0).then(|| [0.0, -d.score[1] / h[1][1]]),
        (true, true) => None,
    }
}

/// Backtracking line search inside the box; `None` if 60 halvings fail.
fn line_search(obj: &IpdObjective, it: &Iterate, dir: [f64; 2]) -> Option<Iterate> {
    let mut t_alpha = f64::INFINITY;
    if dir[0] < 0.0 {
        let floor = EPS.max(0.1 * it.alpha);
        t_alpha = (it.alpha - floor) / -dir[0];
    } else if dir[0] > 0.0 {
        let ceiling = (1.0 - EPS).min(it.alpha + 0.9 * (1.0 - it.alpha));
        t_alpha = (ceiling - it.alpha) / dir[0];
    }
    let t_zeta = if dir[1] < 0.0 { it.zeta / -dir[1] } else { f64::INFINITY };
    let mut t = 1.0f64.min(t_alpha).min(t_zeta);
    if !(t > 0.0) {
        return None;
    }
    for _ in 0..=MAX_HALVINGS {
        let alpha = (it.alpha + t * dir[0]).clamp(EPS, 1.0 - EPS);
        let zeta = if t >= t_zeta { 0.0 } else { (it.zeta + t * dir[1]).max(0.0) };
        let ll = obj.log_likelihood(alpha, zeta);
        if is_ascent(ll, it.ll) {
            return Some(Iterate { alpha, zeta, ll });
        }
        t *= 0.5;
    }
    None
}

/// Censored IPD maximum likelihood by Newton-Raphson from a grid argmax.
///
/// Convergence: every score equation `P = N` holds with
/// `|P - N| / (P + N) < config.tol`, or is a Karush-Kuhn-Tucker boundary
/// condition (`zeta = 0` with `dl/dzeta <= 0`, `alpha` at the box edge with
/// the score pointing outward). Steps are cut to stay inside
/// `alpha in [1e-12, 1 - 1e-12]`, `zeta >= 0` and halved until the
/// log-likelihood does not decrease.
pub fn fit_ipd(sample: &GroupedSample, config: &FitConfig) -> Result<FitResult, FitError> {
    if sample.is_empty() {
        return Err(FitError::EmptySample);
    }
    if sample.failure_count() == 0 {
        return Err(FitError::AllCensored);
    }
    let obj = IpdObjective::new(sample);
    let (alpha0, zeta0, _) = obj.grid_argmax(config.grid_size);
    let mut it = Iterate {
        alpha: alpha0,
        zeta: zeta0,
        ll: obj.log_likelihood(alpha0, zeta0),
    };
    let initial = it.ll;
    let mut trace = vec![it.ll];
    let snapshot = |it: &Iterate, d: &IpdDerivatives, residual: f64, iterations: usize, converged: bool, trace: &[f64]| FitResult {
        model: ModelKind::Ipd,
        params: FittedParams::Ipd(IpdParams::new(it.alpha, it.zeta).expect("iterate lies in the box")),
        log_likelihood: it.ll,
        initial_log_likelihood: initial,
        converged,
        iterations,
        score_norm: residual,
        stderr_estimates: wald_stderr(&d.hessian),
        trace: trace.to_vec(),
    };
    for iteration in 0..=config.max_iterations {
        let d = obj.derivatives(it.alpha, it.zeta);
        let active = boundary_activity(&it, d.score);
        let residual = [
            if active.0 { 0.0 } else { d.relative_residuals[0] },
            if active.1 { 0.0 } else { d.relative_residuals[1] },
        ]
        .into_iter()
        .fold(0.0, f64::max);
        if residual < config.tol {
            return Ok(snapshot(&it, &d, residual, iteration, true, &trace));
        }
        if iteration == config.max_iterations {
            return Err(FitError::MaxIterationsExceeded {
                iterations: iteration,
                last: Box::new(snapshot(&it, &d, residual, iteration, false, &trace)),
            });
        }
        let newton = newton_step(&it, &d, active);
        let next = newton
            .and_then(|dir| line_search(&obj, &it, dir))
            .or_else(|| line_search(&obj, &it, gradient_direction(&d, active)));
        match next {
            Some(accepted) => {
                it = accepted;
                trace.push(it.ll);
            }
            None => {
                let last = Box::new(snapshot(&it, &d, residual, iteration, false, &trace));
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::special::digamma;
    use crate::distributions::DiscreteLifetime;
    use crate::sampling::{sample_ipd, LifetimeSample, Record, SeededStream};

    fn mixed_sample() -> GroupedSample {
        GroupedSample::new(vec![(5, 2), (12, 1), (40, 3)], vec![1, 2, 2, 7, 19, 33, 60]).unwrap()
    }

    #[test]
    fn stats_match_hand_count() {
        let stats = IpdLikelihoodStats::from_sample(&mixed_sample());
        assert_eq!(stats.s, 3);
        assert_eq!(stats.r, 7);
        assert_eq!(stats.mu, 13);
        assert_eq!(stats.a, (10 + 12 + 120) + (1 + 2 + 2 + 7 + 19 + 33 + 60) - 7);
    }

    #[test]
    fn single_record_examples() {
        let params = IpdParams::new(0.3, 0.01).unwrap();
        let one = GroupedSample::new(vec![], vec![1]).unwrap();
        assert!((ipd_log_likelihood(&one, &params) - 0.3f64.ln()).abs() < 1e-15);
        let censor = GroupedSample::new(vec![(5, 1)], vec![]).unwrap();
        assert!((ipd_log_likelihood(&censor, &params) - params.log_survival(5)).abs() < 1e-14);
    }

    #[test]
    fn grouped_matches_per_record_sum() {
        let sample = mixed_sample();
        for &(alpha, zeta) in &[(0.3, 0.01), (0.01, 0.001), (0.05, 2.0), (0.2, 0.0), (1e-6, 1e-9)] {
            let params = IpdParams::new(alpha, zeta).unwrap();
            let mut naive = 0.0;
            for r in sample.to_flat().records() {
                naive += if r.is_failure() {
                    params.pmf(r.value).unwrap().ln()
                } else {
                    params.log_survival(r.value)
                };
            }
            let grouped = ipd_log_likelihood(&sample, &params);
            assert!((grouped - naive).abs() < 1e-9, "({alpha}, {zeta}): {grouped} vs {naive}");
        }
    }

    #[test]
    fn boundary_values_are_minus_infinity() {
        let obj = IpdObjective::new(&mixed_sample());
        assert_eq!(obj.log_likelihood(0.0, 0.1), f64::NEG_INFINITY);
        assert_eq!(obj.log_likelihood(1.0, 0.1), f64::NEG_INFINITY);
        assert_eq!(obj.log_likelihood(0.5, -0.1), f64::NEG_INFINITY);
    }

    /// `sum_{i<n} i / (1 + i zeta)` through digamma differences.
    fn digamma_risk_sum(n: u64, zeta: f64) -> f64 {
        let x = 1.0 / zeta;
        (n as f64 - x * (digamma(x + n as f64).unwrap() - digamma(x).unwrap())) / zeta
    }

    #[test]
    fn zeta_score_matches_digamma_form() {
        let sample = mixed_sample();
        let obj = IpdObjective::new(&sample);
        let (alpha, zeta) = (0.05, 0.3);
        let d = obj.derivatives(alpha, zeta);
        let flat = sample.to_flat();
        let mut expected = 0.0;
        for r in flat.records() {
            if r.is_failure() {
                let lag = (r.value - 1) as f64;
                expected += lag / (alpha + lag * zeta);
            }
            expected -= digamma_risk_sum(r.value, zeta);
        }
        assert!((d.score[1] - expected).abs() < 1e-10 * expected.abs().max(1.0));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let obj = IpdObjective::new(&mixed_sample());
        for &(alpha, zeta) in &[(0.1, 0.05), (0.02, 0.4), (0.3, 0.001)] {
            let d = obj.derivatives(alpha, zeta);
            let h = 1e-6;
            let ga = (obj.log_likelihood(alpha + h * alpha, zeta) - obj.log_likelihood(alpha - h * alpha, zeta))
                / (2.0 * h * alpha);
            let gz = (obj.log_likelihood(alpha, zeta + h * zeta) - obj.log_likelihood(alpha, zeta - h * zeta))
                / (2.0 * h * zeta);
            assert!((d.score[0] - ga).abs() < 1e-6 * ga.abs().max(1.0));
            assert!((d.score[1] - gz).abs() < 1e-6 * gz.abs().max(1.0));
            let dz = obj.derivatives(alpha, zeta + h * zeta);
            let dzm = obj.derivatives(alpha, zeta - h * zeta);
            let hzz = (dz.score[1] - dzm.score[1]) / (2.0 * h * zeta);
            let haz = (dz.score[0] - dzm.score[0]) / (2.0 * h * zeta);
            assert!((d.hessian[1][1] - hzz).abs() < 1e-6 * hzz.abs().max(1.0));
            assert!((d.hessian[0][1] - haz).abs() < 1e-6 * haz.abs().max(1.0));
        }
    }

    #[test]
    fn grid_argmax_dominates_grid() {
        let obj = IpdObjective::new(&mixed_sample());
        let (alpha, zeta, ll) = obj.grid_argmax(50);
        assert!((obj.log_likelihood(alpha, zeta) - ll).abs() < 1e-9 * ll.abs());
        for &(a, z) in &[(1e-8, 1e-12), (0.5, 10.0), (0.1, 0.01)] {
            assert!(obj.log_likelihood(a, z) <= ll + 1e-9);
        }
    }

    #[test]
    fn all_censored_and_empty_are_rejected() {
        let censored = GroupedSample::new(vec![(4, 2)], vec![]).unwrap();
        assert_eq!(fit_ipd(&censored, &FitConfig::default()), Err(FitError::AllCensored));
        let empty = GroupedSample::new(vec![], vec![]).unwrap();
        assert_eq!(fit_ipd(&empty, &FitConfig::default()), Err(FitError::EmptySample));
    }

    #[test]
    fn geometric_recovery() {
        let params = IpdParams::new(0.2, 0.0).unwrap();
        let sample = sample_ipd(&params, 10_000, &mut SeededStream::new(11, 0).rng()).unwrap();
        let fit = fit_ipd(&sample.to_grouped(), &FitConfig::default()).unwrap();
        let (alpha, zeta) = fit.params.pair();
        assert!(fit.converged);
        assert!((alpha - 0.2).abs() < 0.015, "alpha {alpha}");
        assert!(zeta < 1e-3, "zeta {zeta}");
        assert!(fit.log_likelihood >= fit.initial_log_likelihood);
    }

    #[test]
    fn ageing_recovery_with_monotone_trace() {
        let params = IpdParams::new(0.01, 0.001).unwrap();
        let sample = sample_ipd(&params, 10_000, &mut SeededStream::new(12, 0).rng()).unwrap();
        let fit = fit_ipd(&sample.to_grouped(), &FitConfig::default()).unwrap();
        let (alpha, zeta) = fit.params.pair();
        assert!((alpha / 0.01 - 1.0).abs() < 0.1, "alpha {alpha}");
        assert!((zeta / 0.001 - 1.0).abs() < 0.1, "zeta {zeta}");
        for w in fit.trace.windows(2) {
            assert!(is_ascent(w[1], w[0]));
        }
        let d = IpdObjective::new(&sample.to_grouped()).derivatives(alpha, zeta);
        assert!(d.relative_residuals[0] < 1e-8 && d.relative_residuals[1] < 1e-8);
        assert!(fit.stderr_estimates.is_some());
    }

    #[test]
    fn floor_alpha_with_coupled_newton_step_converges() {
        use crate::distributions::WeibullParams;
        use crate::sampling::sample_weibull_discretized;
        let params = WeibullParams::new(100.0, 2.25).unwrap();
        for seed in 0..20 {
            let sample = sample_weibull_discretized(&params, 1000, &mut SeededStream::new(seed, 7).rng()).unwrap();
            let fit = fit_ipd(&sample.to_grouped(), &FitConfig::default()).unwrap();
            let (alpha, zeta) = fit.params.pair();
            assert!(fit.converged && zeta > 0.0, "seed {seed}");
            let d = IpdObjective::new(&sample.to_grouped()).derivatives(alpha, zeta);
            assert!(d.relative_residuals[1] < 1e-8, "seed {seed}");
        }
    }

    #[test]
    fn censored_single_value_fit_runs() {
        let sample = LifetimeSample::new(vec![
            Record::failure(3),
            Record::failure(4),
            Record::censored(2),
            Record::failure(1),
            Record::failure(9),
        ])
        .unwrap();
        let fit = fit_ipd(&sample.to_grouped(), &FitConfig::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.log_likelihood >= fit.initial_log_likelihood);
    }
}
