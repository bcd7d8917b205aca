use serde::Serialize;

use super::special::{ln_gamma, regularized_upper_gamma};
use super::{CompensatedSum, DiscreteLifetime};
use crate::error::DomainError;

/// Scale/shape pair shared by the discrete and continuous Weibull laws.
pub trait ScaleShape {
    fn eta(&self) -> f64;
    fn beta(&self) -> f64;

    /// `(t / eta)^beta`, the cumulative hazard of the continuous law.
    #[inline]
    fn cumulative_hazard(&self, t: f64) -> f64 {
        (t / self.eta()).powf(self.beta())
    }
}

fn check_scale_shape(eta: f64, beta: f64) -> Result<(), DomainError> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(DomainError::parameter("eta", eta, "a finite value > 0"));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(DomainError::parameter("beta", beta, "a finite value > 0"));
    }
    Ok(())
}

/// Type-I discrete Weibull (Weibull-1) parameters.
///
/// `theta = exp(-(1/eta)^beta)` is kept alongside `(eta, beta)`; `1 - theta`
/// is the failure probability at the first solicitation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct W1Params {
    eta: f64,
    beta: f64,
    theta: f64,
}

/// Continuous two-parameter Weibull.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeibullParams {
    eta: f64,
    beta: f64,
}

impl ScaleShape for W1Params {
    fn eta(&self) -> f64 {
        self.eta
    }
    fn beta(&self) -> f64 {
        self.beta
    }
}

impl ScaleShape for WeibullParams {
    fn eta(&self) -> f64 {
        self.eta
    }
    fn beta(&self) -> f64 {
        self.beta
    }
}

impl W1Params {
    pub fn new(eta: f64, beta: f64) -> Result<Self, DomainError> {
        check_scale_shape(eta, beta)?;
        let first = (1.0 / eta).powf(beta);
        let theta = (-first).exp();
        // theta may round to 1 for very large eta; only reject degenerate laws
        if !(first > 0.0 && theta > 0.0) {
            return Err(DomainError::parameter(
                "theta",
                theta,
                "exp(-(1/eta)^beta) strictly inside (0, 1)",
            ));
        }
        Ok(Self { eta, beta, theta })
    }

    /// No validation; for optimizer trial points.
    pub(crate) fn unchecked(eta: f64, beta: f64) -> Self {
        Self {
            eta,
            beta,
            theta: (-(1.0 / eta).powf(beta)).exp(),
        }
    }

    /// Build from the `(theta, beta)` parametrization.
    pub fn from_theta(theta: f64, beta: f64) -> Result<Self, DomainError> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(DomainError::parameter("theta", theta, "a probability in (0, 1)"));
        }
        check_scale_shape(1.0, beta)?;
        Self::new((-theta.ln()).powf(-1.0 / beta), beta)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// The continuous Weibull with the same parameters.
    pub fn continuous(&self) -> WeibullParams {
        WeibullParams {
            eta: self.eta,
            beta: self.beta,
        }
    }

    /// `z(n) - z(n-1)` with `z(n) = (n/eta)^beta`, free of cancellation.
    #[inline]
    pub(crate) fn hazard_increment(&self, n: u64) -> f64 {
        debug_assert!(n >= 1);
        if n == 1 {
            return self.cumulative_hazard(1.0);
        }
        if self.beta == 1.0 {
            return 1.0 / self.eta;
        }
        let nf = n as f64;
        let zn = self.cumulative_hazard(nf);
        // z(n) (1 - (1 - 1/n)^beta)
        zn * -(self.beta * (-1.0 / nf).ln_1p()).exp_m1()
    }

    #[inline]
    pub(crate) fn hazard_at(&self, n: u64) -> f64 {
        -(-self.hazard_increment(n)).exp_m1()
    }

    /// `ln P[N = n]` evaluated without forming `S(n-1) - S(n)`.
    pub(crate) fn log_pmf_at(&self, n: u64) -> f64 {
        let prev = if n == 1 {
            0.0
        } else {
            self.cumulative_hazard((n - 1) as f64)
        };
        -prev + (-(-self.hazard_increment(n)).exp_m1()).ln()
    }

    /// `int_n^inf S(t) dt = eta Gamma(1 + 1/beta) Q(1/beta, (n/eta)^beta)`.
    fn survival_integral_from(&self, n: f64) -> f64 {
        let shape = 1.0 / self.beta;
        let q = regularized_upper_gamma(shape, self.cumulative_hazard(n))
            .expect("shape and argument are in range");
        (self.eta.ln() + ln_gamma(1.0 + shape) + q.ln()).exp()
    }

    /// Euler-Maclaurin estimate of `sum_{m>=n} S(m)` once `S` is smooth on
    /// the unit scale, or `None` while it is not.
    fn euler_maclaurin_tail(&self, n: u64) -> Option<f64> {
        const START: u64 = 64;
        const MAX_RELATIVE_SLOPE: f64 = 0.01;
        let (eta, beta) = (self.eta, self.beta);
        if n < START {
            return None;
        }
        let t = n as f64;
        let z = self.cumulative_hazard(t);
        // hazard rate of the continuous law at t; decreasing in t when beta <= 1
        let rate = beta * z / t;
        if rate > MAX_RELATIVE_SLOPE || (beta > 1.0 && beta / eta > MAX_RELATIVE_SLOPE) {
            return None;
        }
        let s = (-z).exp();
        // S = exp(g), g = -z(t)
        let g1 = -beta * z / t;
        let g2 = -beta * (beta - 1.0) * z / (t * t);
        let g3 = -beta * (beta - 1.0) * (beta - 2.0) * z / (t * t * t);
        let d1 = g1 * s;
        let d3 = (g3 + 3.0 * g1 * g2 + g1 * g1 * g1) * s;
        let integral = self.survival_integral_from(t);
        let estimate = integral + 0.5 * s - d1 / 12.0 + d3 / 720.0;
        // S decreasing: int_n^inf S <= sum_{m>=n} S(m) <= S(n) + int_n^inf S
        Some(estimate.clamp(integral, integral + s))
    }
}

impl DiscreteLifetime for W1Params {
    fn hazard(&self, n: u64) -> Result<f64, DomainError> {
        DomainError::check_index(n, 1)?;
        Ok(self.hazard_at(n))
    }

    fn pmf(&self, n: u64) -> Result<f64, DomainError> {
        DomainError::check_index(n, 1)?;
        Ok(self.log_pmf_at(n).exp())
    }

    fn log_survival(&self, n: u64) -> f64 {
        -self.cumulative_hazard(n as f64)
    }

    /// Series `sum_{n>=0} S(n)`.
    ///
    /// Direct summation until either the terms drop below `1e-16` of the
    /// running sum (the remainder is then taken as the midpoint of its
    /// integral bracket `[int_{N+1}^inf S, int_N^inf S]`), or `S` is smooth
    /// enough on the unit scale for an Euler-Maclaurin tail, which is clamped
    /// to the certified bracket `[int_N^inf S, S(N) + int_N^inf S]`.
    fn mttf(&self) -> f64 {
        let mut sum = CompensatedSum::default();
        let mut n = 0u64;
        loop {
            if let Some(tail) = self.euler_maclaurin_tail(n) {
                sum.add(tail);
                return sum.value();
            }
            let s = self.survival(n);
            sum.add(s);
            if s <= 1e-16 * sum.value() {
                let upper = self.survival_integral_from(n as f64);
                let lower = self.survival_integral_from((n + 1) as f64);
                sum.add(0.5 * (upper + lower));
                return sum.value();
            }
            n += 1;
        }
    }
}

impl WeibullParams {
    pub fn new(eta: f64, beta: f64) -> Result<Self, DomainError> {
        check_scale_shape(eta, beta)?;
        Ok(Self { eta, beta })
    }

    pub(crate) fn unchecked(eta: f64, beta: f64) -> Self {
        Self { eta, beta }
    }

    /// Density `(beta/eta) (t/eta)^(beta-1) exp(-(t/eta)^beta)` for `t > 0`.
    pub fn density(&self, t: f64) -> Result<f64, DomainError> {
        if !(t > 0.0) {
            return Err(DomainError::parameter("t", t, "a value > 0"));
        }
        Ok(self.log_density_at(t).exp())
    }

    pub(crate) fn log_density_at(&self, t: f64) -> f64 {
        let x = t / self.eta;
        self.beta.ln() - self.eta.ln() + (self.beta - 1.0) * x.ln() - x.powf(self.beta)
    }

    pub fn survival(&self, t: f64) -> f64 {
        (-self.cumulative_hazard(t.max(0.0))).exp()
    }

    pub fn cdf(&self, t: f64) -> f64 {
        -(-self.cumulative_hazard(t.max(0.0))).exp_m1()
    }

    /// Continuous hazard rate `(beta/eta) (t/eta)^(beta-1)`.
    pub fn hazard_rate(&self, t: f64) -> f64 {
        self.beta / self.eta * (t / self.eta).powf(self.beta - 1.0)
    }

    /// `eta Gamma(1 + 1/beta)`.
    pub fn mean(&self) -> f64 {
        (self.eta.ln() + ln_gamma(1.0 + 1.0 / self.beta)).exp()
    }

    /// The Weibull-1 law with the same parameters.
    pub fn discretized(&self) -> Result<W1Params, DomainError> {
        W1Params::new(self.eta, self.beta)
    }
}

/// `eta (-ln(1 - q))^(1/beta)`, identical for the discrete and continuous laws.
pub fn weibull_quantile<P: ScaleShape + ?Sized>(params: &P, q: f64) -> Result<f64, DomainError> {
    DomainError::check_probability("q", q)?;
    Ok(params.eta() * (-(-q).ln_1p()).powf(1.0 / params.beta()))
}
