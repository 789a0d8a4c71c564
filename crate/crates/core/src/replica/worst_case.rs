//! Large-system form of the sufficient condition for recovering every
//! `rho N`-sparse signal by L1 minimisation with i.i.d. Gaussian matrices.

use crate::error::{domain, Result};

fn margin() -> f64 {
    2f64.powf(0.25) - 1.0
}

/// Both limit inequalities at `(alpha, rho)`:
/// `2 rho ln(1/(2 rho)) + 2 rho - alpha/2 (c - sqrt(2 rho/alpha))^2 < 0` and
/// `c - sqrt(2 rho/alpha) > 0`, with `c = 2^(1/4) - 1`.
pub fn worst_case_holds(alpha: f64, rho: f64) -> bool {
    let gap = margin() - (2.0 * rho / alpha).sqrt();
    let entropy = 2.0 * rho * (1.0 / (2.0 * rho)).ln() + 2.0 * rho;
    gap > 0.0 && entropy - 0.5 * alpha * gap * gap < 0.0
}

/// Smallest `alpha` in `(0, 1]` satisfying [`worst_case_holds`], to within `tol`
/// from above; `None` when even `alpha = 1` fails.
pub fn worst_case_alpha(rho: f64, tol: f64) -> Result<Option<f64>> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(domain(format!("rho must lie in (0, 1], got {rho}")));
    }
    worst_case_alpha_from(rho, 0.0, tol)
}

pub(crate) fn worst_case_alpha_from(rho: f64, lower: f64, tol: f64) -> Result<Option<f64>> {
    if !(tol > 0.0) {
        return Err(domain(format!("tolerance must be positive, got {tol}")));
    }
    if !worst_case_holds(1.0, rho) {
        return Ok(None);
    }
    // The second inequality alone needs alpha > 2 rho / c^2; above that the
    // first one is monotone in alpha, so the feasible set is an interval up to 1.
    let c = margin();
    let mut lo = (2.0 * rho / (c * c)).max(lower);
    if worst_case_holds(lo, rho) {
        lo = 2.0 * rho / (c * c);
    }
    let mut hi = 1.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if worst_case_holds(mid, rho) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}
