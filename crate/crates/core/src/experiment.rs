//! Monte Carlo estimate of the L1 critical rate by basis pursuit.
//!
//! Each trial fixes a sparse signal and lowers the number of measurements
//! `P` from `N` one at a time until reconstruction fails; `P_c = P + 1` is
//! recorded. Per-`N` means of `P_c / N` are extrapolated to `N -> inf` by a
//! quadratic fit in `1/N`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linprog::{solve_basis_pursuit, EqualityConstrainedL1Problem};

/// Eigenvalues of `F F'` for the rotationally invariant ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spectrum {
    /// All eigenvalues 1: orthonormal rows.
    Unit,
    /// I.i.d. uniform on `[lo, hi]`, `lo > 0`.
    Uniform { lo: f64, hi: f64 },
    /// Fixed values; the first `P` are used.
    Values(Vec<f64>),
}

impl Spectrum {
    fn validate(&self) -> Result<()> {
        match self {
            Spectrum::Unit => Ok(()),
            Spectrum::Uniform { lo, hi } => {
                if lo.is_finite() && hi.is_finite() && *lo > 0.0 && hi >= lo {
                    Ok(())
                } else {
                    Err(domain(format!("uniform spectrum needs 0 < lo <= hi, got [{lo}, {hi}]")))
                }
            }
            Spectrum::Values(v) => {
                if v.iter().all(|&l| l.is_finite() && l > 0.0) {
                    Ok(())
                } else {
                    Err(domain("spectrum values must be positive and finite"))
                }
            }
        }
    }

    fn draw(&self, p: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
        self.validate()?;
        match self {
            Spectrum::Unit => Ok(vec![1.0; p]),
            Spectrum::Uniform { lo, hi } => Ok((0..p).map(|_| rng.random_range(*lo..=*hi)).collect()),
            Spectrum::Values(v) if v.len() >= p => Ok(v[..p].to_vec()),
            Spectrum::Values(v) => Err(domain(format!("spectrum has {} values, {p} needed", v.len()))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    /// Entries i.i.d. normal with variance `1/N`.
    GaussianIid,
    /// `F = U S O'` with Haar `U`, `O` and `S` carrying square roots of the spectrum.
    RotationallyInvariant(Spectrum),
}

impl EnsembleKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            EnsembleKind::GaussianIid => Ok(()),
            EnsembleKind::RotationallyInvariant(s) => s.validate(),
        }
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnsembleKind::GaussianIid => f.write_str("gaussian"),
            EnsembleKind::RotationallyInvariant(Spectrum::Unit) => f.write_str("rotinv:unit"),
            EnsembleKind::RotationallyInvariant(Spectrum::Uniform { lo, hi }) => write!(f, "rotinv:uniform:{lo}:{hi}"),
            EnsembleKind::RotationallyInvariant(Spectrum::Values(v)) => {
                let list: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "rotinv:values:{}", list.join(","))
            }
        }
    }
}

impl FromStr for EnsembleKind {
    type Err = Error;

    /// `gaussian`, `rotinv:unit`, `rotinv:uniform:LO:HI` or `rotinv:values:A,B,...`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| domain(format!("bad number `{t}` in ensemble `{s}`")));
        let kind = match parts.as_slice() {
            ["gaussian"] | ["gaussian_iid"] => EnsembleKind::GaussianIid,
            ["rotinv"] | ["rotinv", "unit"] => EnsembleKind::RotationallyInvariant(Spectrum::Unit),
            ["rotinv", "uniform", lo, hi] => EnsembleKind::RotationallyInvariant(Spectrum::Uniform { lo: num(lo)?, hi: num(hi)? }),
            ["rotinv", "values", list] => {
                let v = list.split(',').map(num).collect::<Result<Vec<_>>>()?;
                EnsembleKind::RotationallyInvariant(Spectrum::Values(v))
            }
            _ => return Err(domain(format!("unknown ensemble `{s}`"))),
        };
        kind.validate()?;
        Ok(kind)
    }
}

/// Distribution of the non-zero signal entries (both unit variance).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonZeroDist {
    #[default]
    Gaussian,
    /// Uniform on `[-sqrt(3), sqrt(3)]`.
    Uniform,
}

/// How the `P`-row matrix is obtained as `P` is lowered.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    /// One `N x N` matrix per trial; `P` rows are its first `P` rows.
    #[default]
    Nested,
    /// A fresh `P x N` matrix for every `P`.
    Redraw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOptions {
    /// Failure when `||x_hat - x0||_1` exceeds this.
    pub recovery_tol: f64,
    pub design: Design,
    pub nonzeros: NonZeroDist,
}

impl Default for TrialOptions {
    fn default() -> Self {
        Self { recovery_tol: 1e-4, design: Design::Nested, nonzeros: NonZeroDist::Gaussian }
    }
}

/// A sampled reconstruction problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub matrix: DMatrix<f64>,
    pub signal: DVector<f64>,
    pub measurement: DVector<f64>,
    pub support_size: usize,
    pub seed: u64,
}

impl ProblemInstance {
    pub fn sample(p: usize, n: usize, rho: f64, kind: &EnsembleKind, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let signal = draw_signal(n, rho, NonZeroDist::Gaussian, &mut rng)?;
        let matrix = draw_matrix(p, n, kind, &mut rng)?;
        let measurement = &matrix * &signal;
        let support_size = signal.iter().filter(|v| **v != 0.0).count();
        Ok(Self { matrix, signal, measurement, support_size, seed })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub n: usize,
    /// Index of the trial within its `N`.
    pub trial: usize,
    pub p_critical: usize,
    pub solves: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NStats {
    pub n: usize,
    pub alpha_hat: f64,
    pub stderr: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalEstimate {
    pub rho: f64,
    pub per_n: Vec<NStats>,
    pub extrapolated_alpha_c: f64,
    /// `(a, b, c)` of `a + b/N + c/N^2`.
    pub fit_coeffs: [f64; 3],
    /// Root of the summed squared fit residuals.
    pub fit_residual: f64,
}

/// Outcomes of a batch of trials, sorted by `(n, trial)`, and the aborted ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialBatch {
    pub rho: f64,
    pub outcomes: Vec<TrialOutcome>,
    pub failures: Vec<TrialFailure>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` at size `n` under base seed `base`.
pub fn trial_seed(base: u64, n: usize, trial: usize) -> u64 {
    splitmix64(base ^ splitmix64((n as u64) << 32 ^ splitmix64(trial as u64)))
}

fn support_size(n: usize, rho: f64) -> Result<usize> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(domain(format!("rho must lie in (0, 1], got {rho}")));
    }
    let k = (rho * n as f64).round() as usize;
    if k == 0 {
        return Err(domain(format!("round(rho n) = 0 for n = {n}, rho = {rho}")));
    }
    Ok(k)
}

fn draw_signal(n: usize, rho: f64, dist: NonZeroDist, rng: &mut impl Rng) -> Result<DVector<f64>> {
    let k = support_size(n, rho)?;
    let mut x = DVector::zeros(n);
    for i in index::sample(rng, n, k) {
        x[i] = match dist {
            NonZeroDist::Gaussian => StandardNormal.sample(rng),
            NonZeroDist::Uniform => rng.random_range(-3f64.sqrt()..3f64.sqrt()),
        };
        while x[i] == 0.0 {
            x[i] = StandardNormal.sample(rng);
        }
    }
    Ok(x)
}

/// Exactly `round(rho n)` non-zero standard normal entries on a uniform random support.
pub fn sample_signal(n: usize, rho: f64, seed: u64) -> Result<DVector<f64>> {
    draw_signal(n, rho, NonZeroDist::Gaussian, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Haar-distributed `n x n` orthogonal matrix: QR of a Gaussian matrix with
/// the signs of `R`'s diagonal moved into `Q`.
pub fn haar_orthogonal(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn draw_matrix(p: usize, n: usize, kind: &EnsembleKind, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    if p == 0 || p > n {
        return Err(domain(format!("need 1 <= p <= n, got p = {p}, n = {n}")));
    }
    match kind {
        EnsembleKind::GaussianIid => {
            let sd = 1.0 / (n as f64).sqrt();
            Ok(DMatrix::from_fn(p, n, |_, _| {
                let z: f64 = StandardNormal.sample(rng);
                sd * z
            }))
        }
        EnsembleKind::RotationallyInvariant(spectrum) => {
            let lambda = spectrum.draw(p, rng)?;
            let u = haar_orthogonal(p, rng);
            let o = haar_orthogonal(n, rng);
            // U S O' = (U diag(sqrt(lambda))) times the first p rows of O'
            let mut us = u;
            for (j, l) in lambda.iter().enumerate() {
                us.column_mut(j).scale_mut(l.sqrt());
            }
            Ok(us * o.columns(0, p).transpose())
        }
    }
}

pub fn sample_matrix(p: usize, n: usize, kind: &EnsembleKind, seed: u64) -> Result<DMatrix<f64>> {
    draw_matrix(p, n, kind, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Whether basis pursuit on `(F, F x0)` returns `x0` within `tol` in L1.
pub fn recovers(matrix: &DMatrix<f64>, signal: &DVector<f64>, tol: f64) -> Result<bool> {
    let problem = EqualityConstrainedL1Problem::new(matrix.clone(), matrix * signal)?;
    let sol = solve_basis_pursuit(&problem).optimal()?;
    Ok((&sol.x - signal).lp_norm(1) <= tol)
}

/// Smallest `P` probed: `max(1, ceil(rho n) - 1)`.
pub fn probe_floor(n: usize, rho: f64) -> usize {
    ((rho * n as f64).ceil() as usize).saturating_sub(1).max(1)
}

/// One trial of the decrement protocol.
///
/// `P` runs from `n` down to [`probe_floor`]; the first `P` whose
/// reconstruction misses `x0` by more than `recovery_tol` gives `P_c = P + 1`.
/// When no probed `P` fails, `P_c` is the floor plus one. LP failures abort
/// the trial with the offending `P`.
pub fn run_trial(n: usize, rho: f64, kind: &EnsembleKind, opts: &TrialOptions, seed: u64) -> Result<TrialOutcome> {
    run_indexed_trial(n, 0, rho, kind, opts, seed)
}

fn run_indexed_trial(n: usize, trial: usize, rho: f64, kind: &EnsembleKind, opts: &TrialOptions, seed: u64) -> Result<TrialOutcome> {
    kind.validate()?;
    if opts.recovery_tol.is_nan() || opts.recovery_tol < 0.0 {
        return Err(domain(format!("recovery tolerance must be non-negative, got {}", opts.recovery_tol)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signal = draw_signal(n, rho, opts.nonzeros, &mut rng)?;
    let full = match opts.design {
        Design::Nested => Some(draw_matrix(n, n, kind, &mut rng)?),
        Design::Redraw => None,
    };
    let floor = probe_floor(n, rho);
    let mut solves = 0;
    for p in (floor..=n).rev() {
        let matrix = match &full {
            Some(m) => m.rows(0, p).into_owned(),
            None => draw_matrix(p, n, kind, &mut rng)?,
        };
        solves += 1;
        let ok = recovers(&matrix, &signal, opts.recovery_tol)
            .map_err(|e| Error::NumericalFailure(format!("trial seed {seed}, n = {n}, p = {p}: {e}")))?;
        if !ok {
            return Ok(TrialOutcome { n, trial, p_critical: p + 1, solves, seed });
        }
    }
    Ok(TrialOutcome { n, trial, p_critical: floor + 1, solves, seed })
}

/// `trials` trials at every `n`, run on `workers` threads (all cores when 0).
/// Results do not depend on the worker count.
pub fn run_trials(
    rho: f64,
    n_list: &[usize],
    trials: usize,
    kind: &EnsembleKind,
    opts: &TrialOptions,
    seed: u64,
    workers: usize,
) -> Result<TrialBatch> {
    kind.validate()?;
    for &n in n_list {
        support_size(n, rho)?;
    }
    let jobs: Vec<(usize, usize)> = n_list.iter().flat_map(|&n| (0..trials).map(move |t| (n, t))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| domain(format!("cannot build worker pool: {e}")))?;
    let results: Vec<std::result::Result<TrialOutcome, TrialFailure>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(n, t)| {
                let s = trial_seed(seed, n, t);
                run_indexed_trial(n, t, rho, kind, opts, s).map_err(|e| TrialFailure { n, trial: t, seed: s, message: e.to_string() })
            })
            .collect()
    });
    let (mut outcomes, mut failures) = (Vec::new(), Vec::new());
    for r in results {
        match r {
            Ok(o) => outcomes.push(o),
            Err(f) => failures.push(f),
        }
    }
    outcomes.sort_by_key(|o| (o.n, o.trial));
    failures.sort_by_key(|f| (f.n, f.trial));
    Ok(TrialBatch { rho, outcomes, failures })
}

/// Mean and standard error of `P_c / N` per `N`.
pub fn per_n_stats(outcomes: &[TrialOutcome]) -> Vec<NStats> {
    let mut ns: Vec<usize> = outcomes.iter().map(|o| o.n).collect();
    ns.sort_unstable();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let v: Vec<f64> = outcomes.iter().filter(|o| o.n == n).map(|o| o.p_critical as f64 / n as f64).collect();
            let k = v.len() as f64;
            let mean = v.iter().sum::<f64>() / k;
            let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0) } else { 0.0 };
            NStats { n, alpha_hat: mean, stderr: (var / k).sqrt(), trials: v.len() }
        })
        .collect()
}

/// Least-squares fit of `a + b/N + c/N^2` to `(N, value)` pairs; returns the
/// coefficients and the root of the summed squared residuals.
pub fn fit_inverse_quadratic(points: &[(usize, f64)]) -> Result<([f64; 3], f64)> {
    let mut ns: Vec<usize> = points.iter().map(|p| p.0).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 3 || ns[0] == 0 {
        return Err(domain(format!("quadratic fit in 1/N needs at least 3 distinct positive N, got {}", ns.len())));
    }
    // t = N_min / N keeps the columns on a comparable scale
    let n0 = ns[0] as f64;
    let design = DMatrix::from_fn(points.len(), 3, |i, j| (n0 / points[i].0 as f64).powi(j as i32));
    let rhs = DVector::from_iterator(points.len(), points.iter().map(|p| p.1));
    let coef = design
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::NumericalFailure(format!("least-squares fit failed: {e}")))?;
    let residual = (&design * &coef - &rhs).norm();
    Ok(([coef[0], coef[1] * n0, coef[2] * n0 * n0], residual))
}

pub fn summarize(rho: f64, outcomes: &[TrialOutcome]) -> Result<CriticalEstimate> {
    let per_n = per_n_stats(outcomes);
    let points: Vec<(usize, f64)> = per_n.iter().map(|s| (s.n, s.alpha_hat)).collect();
    let (fit_coeffs, fit_residual) = fit_inverse_quadratic(&points)?;
    Ok(CriticalEstimate { rho, per_n, extrapolated_alpha_c: fit_coeffs[0], fit_coeffs, fit_residual })
}

/// Trials at every `n` and the extrapolated critical rate.
///
/// Aborted trials are left out of the means; more than one in a thousand is
/// an error. Use [`run_trials`] and [`summarize`] to inspect them.
pub fn estimate_alpha_c(rho: f64, n_list: &[usize], trials_per_n: usize, kind: &EnsembleKind, seed: u64) -> Result<CriticalEstimate> {
    let mut distinct = n_list.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(domain("at least 3 distinct N are needed for the quadratic fit"));
    }
    if trials_per_n == 0 {
        return Err(domain("trials_per_n must be positive"));
    }
    let batch = run_trials(rho, &distinct, trials_per_n, kind, &TrialOptions::default(), seed, 0)?;
    let total = batch.outcomes.len() + batch.failures.len();
    if batch.failures.len() * MAX_ABORTED_SHARE.1 > total * MAX_ABORTED_SHARE.0 {
        let f = &batch.failures[0];
        return Err(Error::NumericalFailure(format!(
            "{} of {total} trials aborted, first at n = {} seed {}: {}",
            batch.failures.len(),
            f.n,
            f.seed,
            f.message
        )));
    }
    summarize(rho, &batch.outcomes)
}

/// Largest tolerated share of aborted trials, as `(numerator, denominator)`.
pub const MAX_ABORTED_SHARE: (usize, usize) = (1, 1000);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signal_support_sizes() {
        let x = sample_signal(10, 0.5, 1).unwrap();
        assert_eq!(x.iter().filter(|v| **v != 0.0).count(), 5);
        let x = sample_signal(4, 1.0, 2).unwrap();
        assert!(x.iter().all(|v| *v != 0.0));
        assert!(sample_signal(3, 0.1, 3).is_err());
        assert_eq!(sample_signal(7, 0.3, 9).unwrap(), sample_signal(7, 0.3, 9).unwrap());
    }

    #[test]
    fn ensemble_names_round_trip() {
        for s in ["gaussian", "rotinv:unit", "rotinv:uniform:0.5:2", "rotinv:values:1,2.5,3"] {
            let k: EnsembleKind = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
        assert!("rotinv:uniform:0:1".parse::<EnsembleKind>().is_err());
        assert!("rotinv:values:1,-2".parse::<EnsembleKind>().is_err());
        assert!("bernoulli".parse::<EnsembleKind>().is_err());
    }

    #[test]
    fn unit_spectrum_has_orthonormal_rows() {
        let f = sample_matrix(7, 12, &EnsembleKind::RotationallyInvariant(Spectrum::Unit), 4).unwrap();
        assert!((&f * f.transpose() - DMatrix::identity(7, 7)).amax() < 1e-10);
    }

    #[test]
    fn haar_matrix_is_orthogonal() {
        let q = haar_orthogonal(9, &mut ChaCha8Rng::seed_from_u64(5));
        assert!((q.transpose() * &q - DMatrix::identity(9, 9)).amax() < 1e-12);
    }

    #[test]
    fn dense_signal_fails_below_square() {
        for seed in 0..100 {
            let o = run_trial(12, 1.0, &EnsembleKind::GaussianIid, &TrialOptions::default(), seed).unwrap();
            assert_eq!(o.p_critical, 12, "seed {seed}");
        }
    }

    #[test]
    fn infinite_tolerance_reaches_floor() {
        let opts = TrialOptions { recovery_tol: f64::INFINITY, ..TrialOptions::default() };
        let o = run_trial(12, 0.5, &EnsembleKind::GaussianIid, &opts, 3).unwrap();
        assert_eq!(o.p_critical, probe_floor(12, 0.5) + 1);
        assert_eq!(o.solves, 12 - probe_floor(12, 0.5) + 1);
    }

    #[test]
    fn fit_recovers_exact_quadratic() {
        let pts: Vec<(usize, f64)> = (10..=30).step_by(2).map(|n| (n, 0.83 + 0.5 / n as f64 + 1.0 / (n * n) as f64)).collect();
        let (c, r) = fit_inverse_quadratic(&pts).unwrap();
        assert!((c[0] - 0.83).abs() < 1e-12);
        assert!((c[1] - 0.5).abs() < 1e-10 && (c[2] - 1.0).abs() < 1e-9);
        assert!(r < 1e-12);
        assert!(fit_inverse_quadratic(&[(10, 1.0), (12, 1.0), (10, 1.1)]).is_err());
    }

    #[test]
    fn estimate_needs_three_sizes() {
        assert!(estimate_alpha_c(0.5, &[10, 12, 12], 5, &EnsembleKind::GaussianIid, 1).is_err());
        assert!(estimate_alpha_c(0.5, &[10, 12, 14], 0, &EnsembleKind::GaussianIid, 1).is_err());
    }

    #[test]
    fn batches_do_not_depend_on_workers() {
        let kind = EnsembleKind::GaussianIid;
        let opts = TrialOptions::default();
        let a = run_trials(0.5, &[10, 14], 12, &kind, &opts, 77, 1).unwrap();
        let b = run_trials(0.5, &[10, 14], 12, &kind, &opts, 77, 4).unwrap();
        assert_eq!(a, b);
        assert!(a.outcomes.iter().all(|o| o.p_critical >= 5 && o.p_critical <= o.n + 1));
    }
}
