use thiserror::Error;

/// An argument outside the domain of a model or function.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("{name} = {value} is outside its domain (expected {expected})")]
    Parameter {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("solicitation index {n} is below the minimum {min}")]
    Index { n: u64, min: u64 },
}

impl DomainError {
    pub(crate) fn parameter(name: &'static str, value: f64, expected: &'static str) -> Self {
        DomainError::Parameter {
            name,
            value,
            expected,
        }
    }

    pub(crate) fn check_index(n: u64, min: u64) -> Result<(), Self> {
        if n < min {
            Err(DomainError::Index { n, min })
        } else {
            Ok(())
        }
    }

    pub(crate) fn check_probability(name: &'static str, q: f64) -> Result<(), Self> {
        if q > 0.0 && q < 1.0 {
            Ok(())
        } else {
            Err(DomainError::parameter(name, q, "a probability in (0, 1)"))
        }
    }
}
