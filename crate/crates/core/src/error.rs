use num_complex::Complex64;
use thiserror::Error;

use crate::partition::Partition;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} lies outside the domain [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Adaptive quadrature hit its depth limit before meeting the tolerance.
    #[error("quadrature did not reach tolerance (error bound {error_bound:.3e})")]
    Accuracy {
        estimate: Vec<Complex64>,
        error_bound: f64,
    },

    #[error("enumeration budget exceeded: {0} candidates")]
    Budget(f64),

    #[error("no Hobby-Rice partition below tolerance (best residual {residual:.3e})")]
    PartitionFailure { best: Partition, residual: f64 },

    /// Every attempted bump basis produced a (numerically) singular Jacobian.
    #[error(
        "bump basis singular after {attempts} attempts (best scaled det {best_scaled_det:.3e})"
    )]
    BasisFailure {
        attempts: usize,
        best_scaled_det: f64,
    },

    #[error(
        "corrector did not converge (best |Q| = {best_norm:.3e} after {iterations} iterations)"
    )]
    CorrectorFailure { best_norm: f64, iterations: usize },

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
