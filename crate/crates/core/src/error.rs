use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter {
        name: &'static str,
        reason: &'static str,
    },
    #[error("quadrature did not converge: estimated error {residual:e} exceeds tolerance {tolerance:e}")]
    Quadrature { residual: f64, tolerance: f64 },
    #[error("{count} QAM symbol combinations exceed the joint-average budget of {budget}; use the separate-average method")]
    Capacity { count: u128, budget: u128 },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: &'static str) -> Self {
        Error::Parameter { name, reason }
    }
}
