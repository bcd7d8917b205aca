//! Discrete lifetime modelling: Inverse Polya, Weibull-1 and continuous
//! Weibull distributions, censored maximum likelihood, exact sampling,
//! ageing diagnostics and reproducible simulation studies.

pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod experiments;
pub mod inference;
pub mod sampling;

pub use error::DomainError;
