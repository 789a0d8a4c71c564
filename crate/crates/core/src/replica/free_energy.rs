use super::moments::SiteMoments;
use super::{ModelParams, OrderParameters};
use crate::error::{domain, Result};
use crate::scalar_maps::QuadratureRule;

fn check(theta: &OrderParameters) -> Result<()> {
    if !theta.is_finite() {
        return Err(domain(format!("order parameters must be finite: {theta:?}")));
    }
    if !(theta.chi > 0.0) {
        return Err(domain(format!("chi must be positive, got {}", theta.chi)));
    }
    if !(theta.qhat > 0.0) {
        return Err(domain(format!("qhat must be positive, got {}", theta.qhat)));
    }
    if theta.chihat < 0.0 {
        return Err(domain(format!("chihat must be non-negative, got {}", theta.chihat)));
    }
    Ok(())
}

/// Field widths seen by zero-valued and signal sites.
pub(crate) fn field_widths(theta: &OrderParameters) -> (f64, f64) {
    (theta.chihat.sqrt(), (theta.chihat + theta.mhat * theta.mhat).sqrt())
}

pub(crate) fn site_moments(theta: &OrderParameters, params: &ModelParams, rule: &QuadratureRule) -> (SiteMoments, SiteMoments) {
    let (s0, s1) = field_widths(theta);
    (
        SiteMoments::compute(params.norm, theta.qhat, s0, rule),
        SiteMoments::compute(params.norm, theta.qhat, s1, rule),
    )
}

/// Value of the replica-symmetric extremand at `theta` (not extremised).
pub fn free_energy(theta: &OrderParameters, params: &ModelParams, rule: &QuadratureRule) -> Result<f64> {
    check(theta)?;
    let ModelParams { alpha, rho, .. } = *params;
    let (zero, signal) = site_moments(theta, params, rule);
    let t = theta;
    Ok(alpha * t.mse(rho) / (2.0 * t.chi) + t.mhat * t.m - 0.5 * t.qhat * t.q
        + 0.5 * t.chihat * t.chi
        + (1.0 - rho) * zero.phi
        + rho * signal.phi)
}

/// Partial derivatives of [`free_energy`] in the order `(Q, chi, m, Qhat, chihat, mhat)`.
pub fn stationarity_residuals(theta: &OrderParameters, params: &ModelParams, rule: &QuadratureRule) -> Result<[f64; 6]> {
    check(theta)?;
    let (zero, signal) = site_moments(theta, params, rule);
    Ok(residuals_from(theta, params, &zero, &signal))
}

pub(crate) fn residuals_from(theta: &OrderParameters, params: &ModelParams, zero: &SiteMoments, signal: &SiteMoments) -> [f64; 6] {
    let ModelParams { alpha, rho, .. } = *params;
    let t = theta;
    let mse = t.mse(rho);
    [
        0.5 * alpha / t.chi - 0.5 * t.qhat,
        -0.5 * alpha * mse / (t.chi * t.chi) + 0.5 * t.chihat,
        -alpha / t.chi + t.mhat,
        -0.5 * t.q + 0.5 * ((1.0 - rho) * zero.x_sq + rho * signal.x_sq),
        0.5 * t.chi - 0.5 * ((1.0 - rho) * zero.zx_over_sigma + rho * signal.zx_over_sigma),
        t.m - rho * t.mhat * signal.zx_over_sigma,
    ]
}
