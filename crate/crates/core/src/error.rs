use thiserror::Error;

use crate::replica::OrderParameters;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// The saddle-point iteration hit its cap without meeting the tolerance.
    #[error("saddle-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        theta: Box<OrderParameters>,
    },

    /// A linear system has no solution consistent with its right-hand side.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The linear-programming solver failed to certify a solution.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// An error attached to one grid point while tracing a curve.
    #[error("at rho = {rho}: {source}")]
    AtPoint {
        rho: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
