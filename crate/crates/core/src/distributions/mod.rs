//! Reliability quantities for the discrete lifetime models.
//!
//! Two discrete laws on the solicitation count `N >= 1`:
//!
//! - [`IpdParams`]: the Inverse Polya distribution, hazard
//!   `(alpha + (n-1) zeta) / (1 + (n-1) zeta)`;
//! - [`W1Params`]: the type-I discrete Weibull, survival `exp(-(n/eta)^beta)`;
//!
//! and the continuous comparison model [`WeibullParams`].
//!
//! Survival products are accumulated as sums of `ln(1 - hazard)` so that
//! `S(n)` stays representable far into the tail.

mod ipd;
pub mod special;
mod weibull;

pub use ipd::{IpdParams, UrnScheme};
pub use special::{digamma, ln_gamma, lower_incomplete_gamma, trigamma};
pub use weibull::{weibull_quantile, ScaleShape, W1Params, WeibullParams};

use crate::error::DomainError;

/// Common surface of the discrete lifetime models.
pub trait DiscreteLifetime {
    /// Conditional failure probability at solicitation `n >= 1`.
    fn hazard(&self, n: u64) -> Result<f64, DomainError>;

    /// `P[N = n]` for `n >= 1`.
    fn pmf(&self, n: u64) -> Result<f64, DomainError>;

    /// `ln P[N > n]`; `0` at `n = 0`.
    fn log_survival(&self, n: u64) -> f64;

    /// `P[N > n]`.
    fn survival(&self, n: u64) -> f64 {
        self.log_survival(n).exp()
    }

    /// `P[N <= n]`.
    fn cdf(&self, n: u64) -> f64 {
        -self.log_survival(n).exp_m1()
    }

    /// Mean number of solicitations to failure.
    fn mttf(&self) -> f64;
}

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}
