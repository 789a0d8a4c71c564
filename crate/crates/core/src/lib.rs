//! Typical-case reconstruction limits of sparse signals under L0, L1 and L2
//! minimisation, and a basis-pursuit Monte Carlo check of the L1 limit.

pub mod error;
pub mod experiment;
pub mod linprog;
pub mod replica;
pub mod scalar_maps;

pub use error::{Error, Result};
pub use experiment::{
    estimate_alpha_c, run_trial, run_trials, sample_matrix, sample_signal, summarize, CriticalEstimate, Design,
    EnsembleKind, NStats, NonZeroDist, ProblemInstance, Spectrum, TrialBatch, TrialFailure, TrialOptions, TrialOutcome,
};
pub use linprog::{solve_basis_pursuit, EqualityConstrainedL1Problem, IpmOptions, LpSolution, LpStatus};
pub use replica::{
    alpha_c, at_condition, free_energy, l1_alpha_c, l1_rho_c, l1_success_chihat, solve_saddle, stationarity_residuals,
    trace_boundary, worst_case_alpha, BoundaryMethod, BoundaryPoint, Branch, ModelParams, OrderParameters, PhaseBoundary,
    SaddleSolution,
};
pub use scalar_maps::{phi, x_star, CavityField, Norm, QuadratureRule};
