//! Fixtures shared by the benchmarks.

use lpcrit_core::{sample_matrix, sample_signal, EnsembleKind, EqualityConstrainedL1Problem};

/// Gaussian basis-pursuit instance `F x = F x0` with `P = round(alpha N)` rows.
pub fn bp_instance(n: usize, alpha: f64, rho: f64, seed: u64) -> EqualityConstrainedL1Problem {
    let p = ((alpha * n as f64).round() as usize).max(1);
    let x0 = sample_signal(n, rho, seed).expect("signal");
    let f = sample_matrix(p, n, &EnsembleKind::GaussianIid, seed ^ 0x9e37_79b9).expect("matrix");
    let y = &f * &x0;
    EqualityConstrainedL1Problem::new(f, y).expect("problem")
}
