use super::free_energy::{free_energy, residuals_from, site_moments};
use super::threshold::{active_fraction, eq_rhs, l1_success_chihat, l1_success_stable};
use super::{Branch, ModelParams, OrderParameters, SaddleSolution};
use crate::error::{domain, Error, Result};
use crate::scalar_maps::{Norm, QuadratureRule};

/// Slack on `at_condition <= 1`. L1 failure solutions sit exactly on the
/// marginal value 1 (the active fraction equals `alpha`).
pub const AT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Initial and maximal damping of the fixed-point update.
    pub damping: f64,
    /// Convergence threshold on the largest stationarity residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Magnitude at which `Qhat` (success) or `Q` (runaway) is treated as infinite.
    pub divergence: f64,
    /// MSE below which a solution counts as exact reconstruction.
    pub success_mse: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { damping: 0.5, tol: 1e-10, max_iter: 100_000, divergence: 1e8, success_mse: 1e-8 }
    }
}

pub fn solve_saddle(params: &ModelParams, init: &OrderParameters, rule: &QuadratureRule) -> Result<SaddleSolution> {
    solve_saddle_with(params, init, rule, &SolverOptions::default())
}

fn success_is_stable(params: &ModelParams) -> bool {
    let ModelParams { alpha, rho, norm } = *params;
    match norm {
        Norm::L0 => alpha > rho,
        Norm::L1 => l1_success_stable(alpha, rho),
        Norm::L2 => alpha >= 1.0,
    }
}

fn conjugates(q: f64, chi: f64, m: f64, params: &ModelParams) -> OrderParameters {
    let ModelParams { alpha, rho, .. } = *params;
    let hat = alpha / chi;
    let mse = (q - 2.0 * m + rho).max(0.0);
    OrderParameters { q, chi, m, qhat: hat, chihat: alpha * mse / (chi * chi), mhat: hat }
}

/// Damped fixed-point iteration on the stationarity conditions.
///
/// Each sweep sets the conjugates from `(Q, chi, m)` in closed form and moves
/// `(Q, chi, m)` toward their Gaussian-average values. When `Qhat` diverges
/// with vanishing MSE the analytic success branch is returned; a runaway of `Q`
/// (L0 below its critical rate) yields a [`Branch::Divergent`] solution.
pub fn solve_saddle_with(
    params: &ModelParams,
    init: &OrderParameters,
    rule: &QuadratureRule,
    opts: &SolverOptions,
) -> Result<SaddleSolution> {
    if !init.is_finite() || !(init.chi > 0.0) || !(init.qhat > 0.0) || init.chihat < 0.0 {
        return Err(domain(format!("invalid initial order parameters: {init:?}")));
    }
    let rho = params.rho;
    let mut theta = *init;
    let mut eta = opts.damping;
    let mut prev_step = [0.0; 3];
    let mut last_res = f64::INFINITY;

    for it in 0..opts.max_iter {
        let (zero, signal) = site_moments(&theta, params, rule);
        let res = residuals_from(&theta, params, &zero, &signal)
            .iter()
            .fold(0.0f64, |acc, r| acc.max(r.abs()));
        if !res.is_finite() {
            return Err(Error::NonConvergence { iterations: it, residual: res, theta: Box::new(theta) });
        }
        last_res = res;
        if res < opts.tol {
            // a fixed point with vanishing error is the success limit seen at finite Qhat
            if theta.mse(rho) < opts.success_mse && success_is_stable(params) {
                return with_iterations(success_solution(params), it);
            }
            return finite_solution(params, theta, res, it, rule, opts);
        }

        let q_target = (1.0 - rho) * zero.x_sq + rho * signal.x_sq;
        let chi_target = (1.0 - rho) * zero.zx_over_sigma + rho * signal.zx_over_sigma;
        let m_target = rho * theta.mhat * signal.zx_over_sigma;
        let step = [q_target - theta.q, chi_target - theta.chi, m_target - theta.m];
        // oscillation shows up as a reversal of the update direction
        let turn: f64 = step.iter().zip(&prev_step).map(|(a, b)| a * b).sum();
        if turn < 0.0 {
            eta = (0.5 * eta).max(1e-4);
        } else {
            eta = (eta * 1.1).min(opts.damping);
        }
        prev_step = step;
        let q = theta.q + eta * step[0];
        let chi = theta.chi + eta * step[1];
        let m = theta.m + eta * step[2];
        let next = conjugates(q, chi, m, params);

        if next.qhat > opts.divergence && next.mse(rho) < opts.success_mse {
            return with_iterations(success_solution(params), it + 1);
        }
        if next.q > opts.divergence && next.qhat < 1.0 / opts.divergence {
            if success_is_stable(params) {
                return with_iterations(success_solution(params), it + 1);
            }
            return divergent_solution(params, &theta, &next, it + 1, rule);
        }
        theta = next;
    }

    if success_is_stable(params) {
        return with_iterations(success_solution(params), opts.max_iter);
    }
    Err(Error::NonConvergence { iterations: opts.max_iter, residual: last_res, theta: Box::new(theta) })
}

fn with_iterations(sol: Result<SaddleSolution>, iterations: usize) -> Result<SaddleSolution> {
    sol.map(|s| SaddleSolution { iterations, ..s })
}

fn finite_solution(
    params: &ModelParams,
    theta: OrderParameters,
    residual: f64,
    iterations: usize,
    rule: &QuadratureRule,
    opts: &SolverOptions,
) -> Result<SaddleSolution> {
    let mse = theta.mse(params.rho);
    let mut sol = SaddleSolution {
        params: *params,
        theta,
        free_energy: free_energy(&theta, params, rule)?,
        mse,
        is_success: mse < opts.success_mse,
        at_stable: false,
        residual,
        branch: Branch::Finite,
        iterations,
    };
    sol.at_stable = at_condition(&sol, rule)? <= 1.0 + AT_TOLERANCE;
    Ok(sol)
}

fn divergent_solution(
    params: &ModelParams,
    last: &OrderParameters,
    next: &OrderParameters,
    iterations: usize,
    rule: &QuadratureRule,
) -> Result<SaddleSolution> {
    // Along the runaway ray Q and chi grow together while m and the free
    // energy settle; report the relative drift of the last sweep.
    let drift = [
        (next.q - last.q).abs() / next.q,
        (next.chi - last.chi).abs() / next.chi,
        (next.m - last.m).abs() / (1.0 + next.m.abs()),
    ]
    .into_iter()
    .fold(0.0f64, f64::max);
    let theta = OrderParameters { q: f64::INFINITY, chi: f64::INFINITY, m: next.m, qhat: 0.0, chihat: next.chihat, mhat: 0.0 };
    let mut sol = SaddleSolution {
        params: *params,
        theta,
        free_energy: free_energy(next, params, rule)?,
        mse: theta.mse(params.rho),
        is_success: false,
        at_stable: false,
        residual: drift,
        branch: Branch::Divergent,
        iterations,
    };
    sol.at_stable = at_condition(&sol, rule)? <= 1.0 + AT_TOLERANCE;
    Ok(sol)
}

/// The analytic success branch `Q = m = rho`, `chi = 0`, `Qhat = mhat = inf`.
///
/// `chihat` is the finite fixed point of the success-limit MSE balance for
/// L1 (`N(c)/alpha`) and L2 (`4 rho / (alpha - 1)`), and infinite for L0.
/// The free energy is the typical minimised cost per component. Errors where
/// the branch is not locally stable.
pub fn success_solution(params: &ModelParams) -> Result<SaddleSolution> {
    let ModelParams { alpha, rho, norm } = *params;
    if !success_is_stable(params) {
        return Err(domain(format!("the {norm} success branch is unstable at alpha = {alpha}, rho = {rho}")));
    }
    let (chihat, cost, residual) = match norm {
        Norm::L0 => (f64::INFINITY, rho, 0.0),
        Norm::L1 => {
            let c = l1_success_chihat(params)?;
            (c, rho * (2.0 / std::f64::consts::PI).sqrt(), (eq_rhs(c, alpha, rho) - c).abs())
        }
        Norm::L2 => {
            let c = if alpha > 1.0 { 4.0 * rho / (alpha - 1.0) } else { f64::INFINITY };
            (c, rho, 0.0)
        }
    };
    let theta = OrderParameters { q: rho, chi: 0.0, m: rho, qhat: f64::INFINITY, chihat, mhat: f64::INFINITY };
    let mut sol = SaddleSolution {
        params: *params,
        theta,
        free_energy: cost,
        mse: theta.mse(rho),
        is_success: true,
        at_stable: false,
        residual,
        branch: Branch::Success,
        iterations: 0,
    };
    sol.at_stable = success_at(&sol) <= 1.0 + AT_TOLERANCE;
    Ok(sol)
}

fn success_at(sol: &SaddleSolution) -> f64 {
    let ModelParams { alpha, rho, norm } = sol.params;
    match norm {
        Norm::L0 => f64::INFINITY,
        // slopes 1/Qhat on the active sites with chi * Qhat = alpha
        Norm::L1 => active_fraction(sol.theta.chihat, rho) / alpha,
        Norm::L2 => 1.0 / alpha,
    }
}

/// Left-hand side of the de Almeida–Thouless condition; values above 1 mean
/// the replica-symmetric solution is locally unstable.
///
/// For L0 the minimiser jumps at its threshold, so the squared derivative
/// contains a squared delta that the Gaussian field average cannot absorb: the
/// value is `+inf` for every solution.
pub fn at_condition(solution: &SaddleSolution, rule: &QuadratureRule) -> Result<f64> {
    let ModelParams { alpha, rho, norm } = solution.params;
    if norm == Norm::L0 {
        return Ok(f64::INFINITY);
    }
    match solution.branch {
        Branch::Success => Ok(success_at(solution)),
        Branch::Divergent => Err(domain(format!("no stability value for a divergent {norm} solution"))),
        Branch::Finite => {
            let theta = &solution.theta;
            if !theta.is_finite() || !(theta.chi > 0.0) || !(theta.qhat > 0.0) {
                return Err(domain(format!("at_condition needs finite order parameters, got {theta:?}")));
            }
            let (zero, signal) = site_moments(theta, &solution.params, rule);
            Ok(alpha / (theta.chi * theta.chi) * ((1.0 - rho) * zero.slope_sq + rho * signal.slope_sq))
        }
    }
}
