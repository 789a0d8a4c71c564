//! Stability of the success branch and the resulting critical rates.
//!
//! For L1 the success branch carries a finite `chihat` fixed by
//! `chihat = N(chihat) / alpha` with
//! `N(c) = 2(1-rho)[(c+1) H(c^-1/2) - sqrt(c) g(c^-1/2)] + rho (c+1)`
//! (`g` the normal density). `N` is convex with `N'(c) = 2(1-rho) H(c^-1/2) + rho`,
//! so the branch exists and is stable exactly when the smaller root of
//! `N(c)/alpha - c` exists; the critical rate is where that root becomes a
//! tangency, i.e. `alpha = N'(c)`.

use super::ModelParams;
use crate::error::{domain, Result};
use crate::scalar_maps::{gauss_density, gauss_tail, gauss_tail_inv, Norm};

pub(crate) fn eq_rhs(chihat: f64, alpha: f64, rho: f64) -> f64 {
    if chihat == 0.0 {
        return rho / alpha;
    }
    let u = 1.0 / chihat.sqrt();
    let zero_sites = (chihat + 1.0) * gauss_tail(u) - chihat.sqrt() * gauss_density(u);
    (2.0 * (1.0 - rho) * zero_sites + rho * (chihat + 1.0)) / alpha
}

/// `2(1-rho) H(chihat^-1/2) + rho`: the fraction of sites carrying a non-zero estimate.
pub(crate) fn active_fraction(chihat: f64, rho: f64) -> f64 {
    if chihat == 0.0 {
        return rho;
    }
    2.0 * (1.0 - rho) * gauss_tail(1.0 / chihat.sqrt()) + rho
}

enum FixedPoint {
    Root(f64),
    /// `N(c)/alpha - c` stays positive; carries its minimum value.
    Absent(f64),
}

fn fixed_point(alpha: f64, rho: f64) -> FixedPoint {
    let gap = |c: f64| eq_rhs(c, alpha, rho) - c;
    if rho >= 1.0 {
        return if alpha > 1.0 { FixedPoint::Root(1.0 / (alpha - 1.0)) } else { FixedPoint::Absent(f64::INFINITY) };
    }
    let upper = if alpha < 1.0 {
        // minimiser of the convex gap: N'(c) = alpha
        let u = gauss_tail_inv((alpha - rho) / (2.0 * (1.0 - rho)));
        let c_min = 1.0 / (u * u);
        let g = gap(c_min);
        if !(g < 0.0) {
            return FixedPoint::Absent(g);
        }
        c_min
    } else {
        let mut c = 1.0;
        while gap(c) >= 0.0 {
            c *= 2.0;
            if !c.is_finite() {
                return FixedPoint::Absent(f64::INFINITY);
            }
        }
        c
    };
    let (mut lo, mut hi) = (0.0, upper);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    FixedPoint::Root(0.5 * (lo + hi))
}

/// `chihat` of the L1 success branch at `(alpha, rho)`.
///
/// Errors when `alpha <= rho` or when no fixed point exists, which happens
/// below the critical rate.
pub fn l1_success_chihat(params: &ModelParams) -> Result<f64> {
    if params.norm != Norm::L1 {
        return Err(domain(format!("success chihat is defined here for l1 only, got {}", params.norm)));
    }
    let ModelParams { alpha, rho, .. } = *params;
    if alpha <= rho {
        return Err(domain(format!("no success branch for alpha = {alpha} <= rho = {rho}")));
    }
    match fixed_point(alpha, rho) {
        FixedPoint::Root(c) => Ok(c),
        FixedPoint::Absent(g) => Err(domain(format!(
            "no positive fixed point for chihat at alpha = {alpha}, rho = {rho} (minimum gap {g:e}); alpha is below the critical rate"
        ))),
    }
}

/// Whether the L1 success branch exists and is locally stable. Ties count as unstable.
pub fn l1_success_stable(alpha: f64, rho: f64) -> bool {
    alpha > rho && matches!(fixed_point(alpha, rho), FixedPoint::Root(_))
}

fn bisect_alpha(rho: f64, mut lo: f64, tol: f64) -> f64 {
    let mut hi = 1.0;
    if rho >= 1.0 || !l1_success_stable(hi, rho) {
        return 1.0;
    }
    lo = lo.clamp(rho, hi);
    if l1_success_stable(lo, rho) {
        lo = rho;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if l1_success_stable(mid, rho) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Critical compression rate of L1 reconstruction at density `rho`.
///
/// Bisection on `alpha` to `tol`; the returned value is on the stable side.
pub fn l1_alpha_c(rho: f64, tol: f64) -> Result<f64> {
    l1_alpha_c_from(rho, rho, tol)
}

/// As [`l1_alpha_c`], with a known lower bound on the answer (continuation).
pub(crate) fn l1_alpha_c_from(rho: f64, lower: f64, tol: f64) -> Result<f64> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(domain(format!("rho must lie in (0, 1], got {rho}")));
    }
    if !(tol > 0.0) {
        return Err(domain(format!("tolerance must be positive, got {tol}")));
    }
    Ok(bisect_alpha(rho, lower, tol))
}

/// Critical density of L1 reconstruction at compression rate `alpha`:
/// the `rho` where `l1_alpha_c(rho) = alpha`.
pub fn l1_rho_c(alpha: f64, tol: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let (mut lo, mut hi) = (0.0, alpha);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if l1_success_stable(alpha, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Critical compression rate and whether the replica-symmetric result is
/// locally stable against symmetry breaking there.
pub fn alpha_c(rho: f64, norm: Norm, tol: f64) -> Result<(f64, bool)> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(domain(format!("rho must lie in (0, 1], got {rho}")));
    }
    match norm {
        Norm::L0 => Ok((rho, false)),
        Norm::L1 => Ok((l1_alpha_c(rho, tol)?, true)),
        Norm::L2 => Ok((1.0, true)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l1(alpha: f64, rho: f64) -> ModelParams {
        ModelParams::new(alpha, rho, Norm::L1).unwrap()
    }

    // Independent route: at the tangency the two conditions collapse to
    // 2(1-rho)[g(u)/u - H(u)] = rho with u = chihat^-1/2.
    fn tangency_alpha(rho: f64) -> f64 {
        let f = |u: f64| 2.0 * (1.0 - rho) * (gauss_density(u) / u - gauss_tail(u)) - rho;
        let (mut lo, mut hi) = (1e-8, 40.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let u = 0.5 * (lo + hi);
        2.0 * (1.0 - rho) * gauss_tail(u) + rho
    }

    #[test]
    fn dense_signal_reduces_to_closed_form() {
        assert!((l1_success_chihat(&l1(2.0, 1.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!((l1_success_chihat(&l1(1.25, 1.0)).unwrap() - 4.0).abs() < 1e-12);
        // substitution check
        assert!((eq_rhs(4.0, 1.25, 1.0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_is_self_consistent() {
        let c = l1_success_chihat(&l1(0.84, 0.5)).unwrap();
        assert!((eq_rhs(c, 0.84, 0.5) - c).abs() < 1e-10);
        assert!(0.84 > active_fraction(c, 0.5));
        for &(a, r) in &[(0.95, 0.1), (1.0, 0.5), (1.7, 0.3), (0.995, 0.9)] {
            let c = l1_success_chihat(&l1(a, r)).unwrap();
            assert!((eq_rhs(c, a, r) - c).abs() < 1e-10 * c.max(1.0), "{a} {r}");
        }
    }

    #[test]
    fn chihat_errors_below_threshold() {
        assert!(l1_success_chihat(&l1(0.5, 0.5)).is_err());
        assert!(l1_success_chihat(&l1(0.3, 0.5)).is_err());
        assert!(l1_success_chihat(&l1(0.8, 0.5)).is_err());
        assert!(l1_success_chihat(&ModelParams::new(0.9, 0.5, Norm::L2).unwrap()).is_err());
    }

    #[test]
    fn alpha_c_matches_reported_values() {
        assert!((l1_alpha_c(0.5, 1e-9).unwrap() - 0.83129).abs() < 1e-4);
        assert_eq!(l1_alpha_c(1.0, 1e-9).unwrap(), 1.0);
        assert!((l1_rho_c(0.5, 1e-9).unwrap() - 0.19284).abs() < 1e-4);
    }

    #[test]
    fn alpha_c_matches_tangency_oracle() {
        for i in 1..20 {
            let rho = i as f64 * 0.05;
            let a = l1_alpha_c(rho, 1e-12).unwrap();
            assert!((a - tangency_alpha(rho)).abs() < 1e-9, "rho={rho}: {a} vs {}", tangency_alpha(rho));
        }
    }

    #[test]
    fn alpha_c_shape() {
        let mut prev = 0.0;
        for i in 1..100 {
            let rho = i as f64 * 0.01;
            let a = l1_alpha_c(rho, 1e-10).unwrap();
            assert!(a > rho && a <= 1.0);
            assert!(a > prev);
            prev = a;
        }
        assert!(l1_alpha_c(1e-4, 1e-10).unwrap() < 0.01);
        assert!(l1_alpha_c(0.999, 1e-10).unwrap() > 0.999);
    }

    #[test]
    fn analytic_branches() {
        assert_eq!(alpha_c(0.3, Norm::L0, 1e-6).unwrap(), (0.3, false));
        assert_eq!(alpha_c(0.3, Norm::L2, 1e-6).unwrap(), (1.0, true));
        let (a, ok) = alpha_c(0.5, Norm::L1, 1e-6).unwrap();
        assert!(ok && (a - 0.83129).abs() < 1e-4);
        assert!(alpha_c(0.0, Norm::L1, 1e-6).is_err());
        assert!(alpha_c(1.5, Norm::L0, 1e-6).is_err());
    }

    #[test]
    fn continuation_seed_does_not_change_answer() {
        let a = l1_alpha_c(0.4, 1e-12).unwrap();
        let b = l1_alpha_c_from(0.4, 0.7, 1e-12).unwrap();
        assert!((a - b).abs() < 2e-12);
        // a seed above the answer is ignored
        let c = l1_alpha_c_from(0.4, 0.95, 1e-12).unwrap();
        assert!((a - c).abs() < 2e-12);
    }
}
