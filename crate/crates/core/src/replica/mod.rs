//! Replica-symmetric analysis at zero temperature.
//!
//! The order parameters are `(Q, chi, m)` with conjugates `(Qhat, chihat, mhat)`.
//! At an extremum `Q` is the mean squared entry of the reconstruction, `m` its
//! overlap with the original signal and `Q - 2m + rho` the per-component MSE.
//! Successful reconstruction is a limit in which `Qhat` and `mhat` diverge;
//! that branch is represented analytically (infinite conjugates) rather than
//! by large finite numbers.

mod boundary;
mod free_energy;
mod moments;
mod saddle;
mod threshold;
mod worst_case;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::scalar_maps::Norm;

pub use boundary::{trace_boundary, BoundaryMethod, BoundaryPoint, PhaseBoundary};
pub use free_energy::{free_energy, stationarity_residuals};
pub use moments::SiteMoments;
pub use saddle::{at_condition, solve_saddle, solve_saddle_with, success_solution, SolverOptions, AT_TOLERANCE};
pub use threshold::{alpha_c, l1_alpha_c, l1_rho_c, l1_success_chihat, l1_success_stable};
pub use worst_case::{worst_case_alpha, worst_case_holds};

/// The six replica-symmetric order parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderParameters {
    pub q: f64,
    pub chi: f64,
    pub m: f64,
    pub qhat: f64,
    pub chihat: f64,
    pub mhat: f64,
}

impl OrderParameters {
    /// Default starting point `(rho, 1, rho/2; 1, 1, 1)`.
    pub fn initial(rho: f64) -> Self {
        Self { q: rho, chi: 1.0, m: 0.5 * rho, qhat: 1.0, chihat: 1.0, mhat: 1.0 }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.q, self.chi, self.m, self.qhat, self.chihat, self.mhat]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self { q: v[0], chi: v[1], m: v[2], qhat: v[3], chihat: v[4], mhat: v[5] }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// `Q - 2m + rho`.
    pub fn mse(&self, rho: f64) -> f64 {
        self.q - 2.0 * self.m + rho
    }
}

/// Compression rate, signal density and reconstruction norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub rho: f64,
    pub norm: Norm,
}

impl ModelParams {
    /// `alpha` may exceed 1 (overdetermined systems); `rho` must lie in `(0, 1]`.
    pub fn new(alpha: f64, rho: f64, norm: Norm) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(domain(format!("alpha must be positive and finite, got {alpha}")));
        }
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(domain(format!("rho must lie in (0, 1], got {rho}")));
        }
        Ok(Self { alpha, rho, norm })
    }
}

/// Which kind of extremum a [`SaddleSolution`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// A finite stationary point.
    Finite,
    /// The success limit `Q = m = rho`, `Qhat, mhat -> inf`.
    Success,
    /// A runaway limit `Q, chi -> inf`, `Qhat, mhat -> 0` (only seen for L0).
    Divergent,
}

/// An extremum of the replica-symmetric free energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleSolution {
    pub params: ModelParams,
    pub theta: OrderParameters,
    pub free_energy: f64,
    pub mse: f64,
    pub is_success: bool,
    pub at_stable: bool,
    pub residual: f64,
    pub branch: Branch,
    pub iterations: usize,
}
