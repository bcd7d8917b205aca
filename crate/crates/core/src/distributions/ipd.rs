use serde::Serialize;

use super::{CompensatedSum, DiscreteLifetime};
use crate::error::DomainError;

/// Inverse Polya distribution parameters.
///
/// `alpha` is the failure probability at the first solicitation and `zeta`
/// the ageing intensity. `zeta = 0` is admitted and gives the geometric law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IpdParams {
    alpha: f64,
    zeta: f64,
}

/// Raw Polya urn: `a` failure balls, `b` operating balls, `z` failure balls
/// added after every survived solicitation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct UrnScheme {
    a: u64,
    b: u64,
    z: u64,
}

impl UrnScheme {
    pub fn new(a: u64, b: u64, z: u64) -> Result<Self, DomainError> {
        if a == 0 {
            return Err(DomainError::parameter("a", 0.0, "at least one failure ball"));
        }
        if b == 0 {
            return Err(DomainError::parameter("b", 0.0, "at least one operating ball"));
        }
        Ok(Self { a, b, z })
    }

    pub fn a(&self) -> u64 {
        self.a
    }

    pub fn b(&self) -> u64 {
        self.b
    }

    pub fn z(&self) -> u64 {
        self.z
    }

    /// `alpha = a / (a + b)`, `zeta = z / (a + b)`.
    pub fn to_params(&self) -> IpdParams {
        let total = (self.a + self.b) as f64;
        IpdParams {
            alpha: self.a as f64 / total,
            zeta: self.z as f64 / total,
        }
    }
}

impl From<UrnScheme> for IpdParams {
    fn from(urn: UrnScheme) -> Self {
        urn.to_params()
    }
}

impl IpdParams {
    pub fn new(alpha: f64, zeta: f64) -> Result<Self, DomainError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(DomainError::parameter("alpha", alpha, "a probability in (0, 1)"));
        }
        if !(zeta >= 0.0) || !zeta.is_finite() {
            return Err(DomainError::parameter("zeta", zeta, "a finite value >= 0"));
        }
        Ok(Self { alpha, zeta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    /// Ageing ratio `zeta / alpha`.
    pub fn ratio(&self) -> f64 {
        self.zeta / self.alpha
    }

    #[inline]
    pub(crate) fn hazard_at(&self, n: u64) -> f64 {
        let k = (n - 1) as f64 * self.zeta;
        (self.alpha + k) / (1.0 + k)
    }

    /// `ln(1 - hazard(n))`, computed without forming `1 - hazard`.
    #[inline]
    fn log_complement_hazard(&self, n: u64, ln_one_minus_alpha: f64) -> f64 {
        ln_one_minus_alpha - ((n - 1) as f64 * self.zeta).ln_1p()
    }

    /// Smallest `n` with `P[N <= n] >= q`.
    pub fn quantile(&self, q: f64) -> Result<u64, DomainError> {
        DomainError::check_probability("q", q)?;
        let target = (-q).ln_1p();
        let ln_one_minus_alpha = (-self.alpha).ln_1p();
        let mut log_s: f64 = 0.0;
        let mut n = 0u64;
        while log_s > target {
            n += 1;
            log_s += self.log_complement_hazard(n, ln_one_minus_alpha);
        }
        Ok(n.max(1))
    }

    /// Second difference `lambda(n) - 2 lambda(n-1) + lambda(n-2)` from its
    /// closed form `2 (alpha - 1) zeta^2 / prod_{k=1..3} (1 + (n-k) zeta)`.
    pub fn second_difference_closed_form(&self, n: u64) -> Result<f64, DomainError> {
        DomainError::check_index(n, 3)?;
        let z = self.zeta;
        let d = |k: u64| 1.0 + (n - k) as f64 * z;
        Ok(2.0 * (self.alpha - 1.0) * z * z / (d(1) * d(2) * d(3)))
    }
}

impl DiscreteLifetime for IpdParams {
    fn hazard(&self, n: u64) -> Result<f64, DomainError> {
        DomainError::check_index(n, 1)?;
        Ok(self.hazard_at(n))
    }

    fn pmf(&self, n: u64) -> Result<f64, DomainError> {
        DomainError::check_index(n, 1)?;
        Ok(self.hazard_at(n) * self.log_survival(n - 1).exp())
    }

    fn log_survival(&self, n: u64) -> f64 {
        let ln_one_minus_alpha = (-self.alpha).ln_1p();
        if self.zeta == 0.0 {
            return n as f64 * ln_one_minus_alpha;
        }
        let mut acc = CompensatedSum::default();
        for i in 1..=n {
            acc.add(self.log_complement_hazard(i, ln_one_minus_alpha));
        }
        acc.value()
    }

    /// Series `sum_{n>=0} S(n)`.
    ///
    /// Summation stops once the geometric tail bound
    /// `S(N) (1 - lambda(N+1)) / lambda(N+1)` (valid because the hazard is
    /// nondecreasing) falls below `1e-13` of the running sum.
    fn mttf(&self) -> f64 {
        if self.zeta == 0.0 {
            return 1.0 / self.alpha;
        }
        let ln_one_minus_alpha = (-self.alpha).ln_1p();
        let mut sum = CompensatedSum::default();
        let mut log_s: f64 = 0.0;
        let mut n = 0u64;
        loop {
            let s = log_s.exp();
            sum.add(s);
            n += 1;
            let next_hazard = self.hazard_at(n);
            let tail_bound = s * (1.0 - next_hazard) / next_hazard;
            if tail_bound <= 1e-13 * sum.value() {
                return sum.value();
            }
            log_s += self.log_complement_hazard(n, ln_one_minus_alpha);
        }
    }
}
