//! Basis pursuit: `min ||x||_1` subject to `F x = y`.
//!
//! Solved as the standard-form linear program `min 1'(u + v)` with
//! `[F, -F](u; v) = y`, `u, v >= 0`, by a primal-dual interior-point method
//! with Mehrotra's predictor-corrector steps. The dual variables `nu` of the
//! equality constraints certify optimality: `|F' nu|_inf <= 1` and
//! `nu' y = ||x||_1`.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EqualityConstrainedL1Problem {
    matrix: DMatrix<f64>,
    rhs: DVector<f64>,
}

impl EqualityConstrainedL1Problem {
    /// Requires `P <= N`, finite entries and no all-zero rows.
    pub fn new(matrix: DMatrix<f64>, rhs: DVector<f64>) -> Result<Self> {
        let (p, n) = matrix.shape();
        if p == 0 || n == 0 {
            return Err(domain("empty constraint matrix"));
        }
        if p > n {
            return Err(domain(format!("more constraints than unknowns ({p} > {n})")));
        }
        if rhs.len() != p {
            return Err(domain(format!("rhs has length {}, expected {p}", rhs.len())));
        }
        if matrix.iter().chain(rhs.iter()).any(|v| !v.is_finite()) {
            return Err(domain("non-finite entry in problem data"));
        }
        if let Some(i) = (0..p).find(|&i| matrix.row(i).iter().all(|&v| v == 0.0)) {
            return Err(domain(format!("row {i} of the matrix is zero")));
        }
        Ok(Self { matrix, rhs })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.rhs
    }

    /// `(P, N)`.
    pub fn shape(&self) -> (usize, usize) {
        self.matrix.shape()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: DVector<f64>,
    /// `sum |x_i|`.
    pub objective: f64,
    pub status: LpStatus,
    pub iterations: usize,
    /// `|F x - y|_inf`.
    pub max_eq_violation: f64,
    /// Dual vector `nu` of the equality constraints.
    pub dual: DVector<f64>,
}

impl LpSolution {
    /// The solution itself when optimal, otherwise the matching error.
    pub fn optimal(self) -> Result<Self> {
        match self.status {
            LpStatus::Optimal => Ok(self),
            LpStatus::Infeasible => Err(Error::Infeasible("inconsistent equality constraints".into())),
            LpStatus::NumericalFailure => Err(Error::NumericalFailure(format!(
                "interior-point method stopped after {} iterations without certificate",
                self.iterations
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmOptions {
    pub max_iter: usize,
    /// Relative duality gap: `|c'z - b'nu| < gap_tol (1 + c'z)`.
    pub gap_tol: f64,
    /// Relative primal and dual infeasibility.
    pub feas_tol: f64,
    /// Snap the result to the basic solution on its support when that keeps
    /// the certificate.
    pub purify: bool,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self { max_iter: 500, gap_tol: 1e-10, feas_tol: 1e-9, purify: true }
    }
}

pub fn solve_basis_pursuit(problem: &EqualityConstrainedL1Problem) -> LpSolution {
    solve_basis_pursuit_with(problem, &IpmOptions::default())
}

pub fn solve_basis_pursuit_with(problem: &EqualityConstrainedL1Problem, opts: &IpmOptions) -> LpSolution {
    let (f, y) = (&problem.matrix, &problem.rhs);
    let n = f.ncols();
    let scale_y = 1.0 + y.amax();

    // Rank-deficient rows: move to an orthonormal basis of the row space.
    let svd = f.clone().svd(true, false);
    let smax = svd.singular_values.max();
    let cutoff = f.nrows().max(n) as f64 * f64::EPSILON * smax;
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > cutoff).collect();
    let basis = if keep.len() < f.nrows() {
        let u = svd.u.as_ref().expect("left singular vectors requested");
        let ur = u.select_columns(&keep);
        let inside = &ur * (ur.transpose() * y);
        if (y - inside).amax() > opts.feas_tol * scale_y {
            return LpSolution {
                x: DVector::zeros(n),
                objective: f64::NAN,
                status: LpStatus::Infeasible,
                iterations: 0,
                max_eq_violation: f64::INFINITY,
                dual: DVector::zeros(f.nrows()),
            };
        }
        Some(ur)
    } else {
        None
    };
    let (fr, yr) = match &basis {
        Some(ur) => (ur.transpose() * f, ur.transpose() * y),
        None => (f.clone(), y.clone()),
    };

    // A stalled run is retried once with a shorter step to the boundary,
    // which keeps iterates better centred.
    let mut total = 0;
    let mut last = None;
    for step in [0.99, 0.9] {
        let (x, nu_r, iterations, converged) = interior_point(&fr, &yr, opts, step);
        total += iterations;
        let dual = match &basis {
            Some(ur) => ur * &nu_r,
            None => nu_r,
        };
        let (mut x, mut dual) = (x, dual);
        if converged && opts.purify {
            if let Some((px, pd)) = purify(f, y, &x, &dual) {
                x = px;
                dual = pd;
            }
        }
        let max_eq_violation = (f * &x - y).amax();
        let objective = x.lp_norm(1);
        let certified = converged
            && max_eq_violation < opts.feas_tol * scale_y
            && (f.transpose() * &dual).amax() <= 1.0 + 1e-8
            && (dual.dot(y) - objective).abs() <= 1e-8 * (1.0 + objective);
        let sol = LpSolution {
            x,
            objective,
            status: if certified { LpStatus::Optimal } else { LpStatus::NumericalFailure },
            iterations: total,
            max_eq_violation,
            dual,
        };
        if certified {
            return sol;
        }
        last = Some(sol);
    }
    last.expect("at least one attempt")
}

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter().zip(dv.iter()).filter(|(_, &d)| d < 0.0).fold(1.0f64, |a, (&x, &d)| a.min(-x / d))
}

/// Mehrotra predictor-corrector on `min 1'z, [F, -F] z = y, z >= 0`.
/// Returns `(x = u - v, nu, iterations, converged)`.
fn interior_point(f: &DMatrix<f64>, y: &DVector<f64>, opts: &IpmOptions, step: f64) -> (DVector<f64>, DVector<f64>, usize, bool) {
    let (p, n) = f.shape();
    if y.amax() == 0.0 {
        return (DVector::zeros(n), DVector::zeros(p), 0, true);
    }
    let ft = f.transpose();
    let apply = |z: &DVector<f64>| f * (z.rows(0, n) - z.rows(n, n));
    let apply_t = |w: &DVector<f64>| {
        let g = &ft * w;
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&g);
        out.rows_mut(n, n).copy_from(&(-g));
        out
    };
    let c = DVector::from_element(2 * n, 1.0);

    // Starting point: least-norm primal, nu = 0 since [F, -F] 1 = 0.
    let gram = f * &ft;
    let w = match gram.clone().cholesky() {
        Some(ch) => ch.solve(y),
        None => gram.lu().solve(y).unwrap_or_else(|| DVector::zeros(p)),
    };
    let half = 0.5 * (&ft * w);
    let mut z = DVector::zeros(2 * n);
    z.rows_mut(0, n).copy_from(&half);
    z.rows_mut(n, n).copy_from(&(-&half));
    let mut nu = DVector::zeros(p);
    let mut s = c.clone();
    let shift = (-1.5 * z.min()).max(0.0);
    z.add_scalar_mut(shift);
    let zs = z.dot(&s);
    let dz = 0.5 * zs / s.sum();
    let ds = 0.5 * zs / z.sum();
    if dz > 0.0 {
        z.add_scalar_mut(dz);
        s.add_scalar_mut(ds);
    } else {
        z.fill(1.0);
    }

    let scale_y = 1.0 + y.amax();
    let dim = (2 * n) as f64;
    for it in 0..opts.max_iter {
        let rp = y - apply(&z);
        let rd = &c - apply_t(&nu) - &s;
        let primal = z.sum();
        let dual_obj = y.dot(&nu);
        let mu = z.dot(&s) / dim;
        if (primal - dual_obj).abs() < opts.gap_tol * (1.0 + primal.abs())
            && rp.amax() < opts.feas_tol * scale_y
            && rd.amax() < opts.feas_tol
        {
            let x = z.rows(0, n) - z.rows(n, n);
            return (x, nu, it, true);
        }
        // Complementarity is exhausted; further steps only amplify rounding.
        // The caller's certificate check decides whether this point is usable.
        if mu < 1e-15 * (1.0 + primal.abs()) {
            let x = z.rows(0, n) - z.rows(n, n);
            return (x, nu, it, true);
        }

        let d = z.component_div(&s);
        let dsum = d.rows(0, n) + d.rows(n, n);
        let mut scaled = f.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= dsum[j];
        }
        let mut normal = &scaled * &ft;
        let exact = normal.clone();
        let chol = match normal.clone().cholesky() {
            Some(ch) => ch,
            None => {
                let bump = 1e-14 * normal.diagonal().amax();
                for i in 0..p {
                    normal[(i, i)] += bump;
                }
                match normal.cholesky() {
                    Some(ch) => ch,
                    None => return (z.rows(0, n) - z.rows(n, n), nu, it, false),
                }
            }
        };
        // Newton system for a complementarity target rc:
        // dnu = M^-1 (rp + A(D rd - S^-1 rc)), ds = rd - A'dnu, dz = S^-1 rc - D ds
        let solve = |rc: &DVector<f64>| {
            let t = d.component_mul(&rd) - rc.component_div(&s);
            let r = &rp + apply(&t);
            let mut dnu = chol.solve(&r);
            for _ in 0..2 {
                let fix = chol.solve(&(&r - &exact * &dnu));
                dnu += fix;
            }
            let ds = &rd - apply_t(&dnu);
            let dz = rc.component_div(&s) - d.component_mul(&ds);
            (dz, dnu, ds)
        };

        let rc_aff = -z.component_mul(&s);
        let (dz_a, _, ds_a) = solve(&rc_aff);
        let ap = max_step(&z, &dz_a);
        let ad = max_step(&s, &ds_a);
        let mu_aff = (&z + ap * &dz_a).dot(&(&s + ad * &ds_a)) / dim;
        let sigma = (mu_aff / mu).powi(3).min(1.0);

        let rc = rc_aff - dz_a.component_mul(&ds_a) + DVector::from_element(2 * n, sigma * mu);
        let (dz, dnu, ds) = solve(&rc);
        let ap = (step * max_step(&z, &dz)).min(1.0);
        let ad = (step * max_step(&s, &ds)).min(1.0);
        z += ap * dz;
        nu += ad * dnu;
        s += ad * ds;
        if !(z.iter().chain(s.iter()).chain(nu.iter()).all(|v| v.is_finite())) {
            return (DVector::zeros(n), DVector::zeros(p), it + 1, false);
        }
    }
    (z.rows(0, n) - z.rows(n, n), nu, opts.max_iter, false)
}

/// Basic solution on the support of an interior-point result, kept only if
/// it solves the system, keeps the signs and closes the gap with `nu`.
/// Falls back to [`crossover`] when the support fit fails.
fn purify(f: &DMatrix<f64>, y: &DVector<f64>, x: &DVector<f64>, dual: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
    let big = x.amax();
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i].abs() > 1e-7 * (1.0 + big)).collect();
    if support.is_empty() || support.len() > f.nrows() {
        return crossover(f, y, x, dual);
    }
    let sub = f.select_columns(&support);
    let coef = sub.svd(true, true).solve(y, 1e-12).ok()?;
    let mut out = DVector::zeros(x.len());
    for (k, &i) in support.iter().enumerate() {
        if coef[k].signum() != x[i].signum() {
            return crossover(f, y, x, dual);
        }
        out[i] = coef[k];
    }
    let fits = (f * &out - y).amax() <= 1e-12 * (1.0 + y.amax()) * (1.0 + big);
    let complementary = (dual.dot(y) - out.lp_norm(1)).abs() <= 1e-9 * (1.0 + big);
    if fits && complementary {
        Some((out, dual.clone()))
    } else {
        crossover(f, y, x, dual)
    }
}

/// Vertex on the `P - 1` columns ranked highest by `|x_i| / (1 - |F'nu|_i)`
/// plus one more, tried in rank order, with the dual recomputed from the
/// basis. A vertex is kept only if that dual is feasible, which makes it optimal.
fn crossover(f: &DMatrix<f64>, y: &DVector<f64>, x: &DVector<f64>, dual: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
    let p = f.nrows();
    let g = f.transpose() * dual;
    let score = |i: usize| x[i].abs() / ((1.0 - g[i].abs()).max(0.0) + 1e-300);
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| score(b).total_cmp(&score(a)));
    let (head, rest) = order.split_at(p - 1);
    rest.iter().find_map(|&last| {
        let mut basis = head.to_vec();
        basis.push(last);
        vertex(f, y, &g, &basis)
    })
}

fn vertex(f: &DMatrix<f64>, y: &DVector<f64>, g: &DVector<f64>, basis: &[usize]) -> Option<(DVector<f64>, DVector<f64>)> {
    let p = basis.len();
    let fb = f.select_columns(basis);
    let xb = fb.clone().lu().solve(y)?;
    let big = xb.amax();
    let target = DVector::from_iterator(
        p,
        basis.iter().zip(xb.iter()).map(|(&i, &v)| if v.abs() > 1e-12 * (1.0 + big) { v.signum() } else { g[i].clamp(-1.0, 1.0) }),
    );
    let nu = fb.transpose().lu().solve(&target)?;
    let mut out = DVector::zeros(f.ncols());
    for (&i, &v) in basis.iter().zip(xb.iter()) {
        out[i] = v;
    }
    let fits = (f * &out - y).amax() <= 1e-12 * (1.0 + y.amax()) * (1.0 + big);
    let feasible = (f.transpose() * &nu).amax() <= 1.0 + 1e-9;
    let complementary = (nu.dot(y) - out.lp_norm(1)).abs() <= 1e-9 * (1.0 + big);
    (fits && feasible && complementary).then_some((out, nu))
}

/// Sparsest `x` with `F x = y` by exhaustive search over supports, smallest
/// size first and lexicographically smallest support among ties. Least
/// squares on each support; accepted when the residual is below `1e-9`.
pub fn l0_oracle(problem: &EqualityConstrainedL1Problem, max_n: usize) -> Result<DVector<f64>> {
    let (p, n) = problem.shape();
    if max_n > 20 || n > max_n {
        return Err(domain(format!("exhaustive search needs N <= max_n <= 20, got N = {n}, max_n = {max_n}")));
    }
    let (f, y) = (&problem.matrix, &problem.rhs);
    if y.amax() < 1e-9 {
        return Ok(DVector::zeros(n));
    }
    for k in 1..=n {
        for support in (0..n).combinations(k) {
            let sub = f.select_columns(&support);
            let Ok(coef) = sub.clone().svd(true, true).solve(y, 1e-12) else {
                continue;
            };
            if (&sub * &coef - y).amax() < 1e-9 {
                let mut x = DVector::zeros(n);
                for (j, &i) in support.iter().enumerate() {
                    x[i] = coef[j];
                }
                return Ok(x);
            }
        }
    }
    Err(Error::Infeasible(format!("no support of size <= {n} reproduces the rhs ({p} equations)")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn problem(rows: usize, cols: usize, data: &[f64], rhs: &[f64]) -> EqualityConstrainedL1Problem {
        EqualityConstrainedL1Problem::new(DMatrix::from_row_slice(rows, cols, data), DVector::from_row_slice(rhs)).unwrap()
    }

    fn gaussian(rows: usize, cols: usize, rng: &mut impl rand::Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
    }

    fn check_certificate(prob: &EqualityConstrainedL1Problem, sol: &LpSolution) {
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((prob.matrix().transpose() * &sol.dual).amax() <= 1.0 + 1e-8);
        assert!((sol.dual.dot(prob.rhs()) - sol.objective).abs() < 1e-8);
        assert!((sol.objective - sol.x.lp_norm(1)).abs() < 1e-12);
    }

    #[test]
    fn one_row_example() {
        let prob = problem(1, 2, &[1.0, 2.0], &[2.0]);
        let sol = solve_basis_pursuit(&prob);
        check_certificate(&prob, &sol);
        // grid oracle over the solution family x1 + 2 x2 = 2
        let best = (0..=400_000)
            .map(|i| -2.0 + i as f64 * 1e-5)
            .map(|x1| x1.abs() + ((2.0 - x1) / 2.0).abs())
            .fold(f64::INFINITY, f64::min);
        assert!((sol.objective - best).abs() < 1e-8);
        assert!((sol.x[0]).abs() < 1e-9 && (sol.x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn identity_returns_rhs() {
        let y = [0.5, -3.0, 0.0, 2.25, 1e-3];
        let mut data = vec![0.0; 25];
        for i in 0..5 {
            data[i * 5 + i] = 1.0;
        }
        let prob = problem(5, 5, &data, &y);
        let sol = solve_basis_pursuit(&prob);
        check_certificate(&prob, &sol);
        for i in 0..5 {
            assert!((sol.x[i] - y[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn recovers_one_sparse_signal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let f = gaussian(4, 6, &mut rng);
            let mut x0 = DVector::zeros(6);
            x0[2] = 1.3;
            let prob = EqualityConstrainedL1Problem::new(f.clone(), &f * &x0).unwrap();
            let sol = solve_basis_pursuit(&prob);
            check_certificate(&prob, &sol);
            assert!((&sol.x - &x0).amax() < 1e-6);
        }
    }

    #[test]
    fn rank_deficient_systems() {
        // second row is twice the first
        let consistent = problem(2, 3, &[1.0, 1.0, 2.0, 2.0, 2.0, 4.0], &[1.0, 2.0]);
        let sol = solve_basis_pursuit(&consistent);
        check_certificate(&consistent, &sol);
        assert!((sol.objective - 0.5).abs() < 1e-9);
        let inconsistent = problem(2, 3, &[1.0, 1.0, 2.0, 2.0, 2.0, 4.0], &[1.0, 3.0]);
        let sol = solve_basis_pursuit(&inconsistent);
        assert_eq!(sol.status, LpStatus::Infeasible);
        assert!(matches!(sol.optimal(), Err(Error::Infeasible(_))));
    }

    #[test]
    fn zero_rhs() {
        let prob = problem(1, 3, &[1.0, -1.0, 0.5], &[0.0]);
        let sol = solve_basis_pursuit(&prob);
        check_certificate(&prob, &sol);
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn invalid_problems() {
        let m = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        assert!(EqualityConstrainedL1Problem::new(m, DVector::from_row_slice(&[1.0, 2.0])).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 0.0]);
        assert!(EqualityConstrainedL1Problem::new(m, DVector::from_row_slice(&[1.0, 2.0])).is_err());
        let m = DMatrix::from_row_slice(1, 2, &[1.0, f64::NAN]);
        assert!(EqualityConstrainedL1Problem::new(m, DVector::from_row_slice(&[1.0])).is_err());
        let m = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        assert!(EqualityConstrainedL1Problem::new(m, DVector::from_row_slice(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn iteration_cap_is_reported() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let f = gaussian(5, 10, &mut rng);
        let y = &f * DVector::from_fn(10, |i, _| if i < 3 { 1.0 } else { 0.0 });
        let prob = EqualityConstrainedL1Problem::new(f, y).unwrap();
        let sol = solve_basis_pursuit_with(&prob, &IpmOptions { max_iter: 2, ..IpmOptions::default() });
        assert_eq!(sol.status, LpStatus::NumericalFailure);
        assert!(matches!(sol.optimal(), Err(Error::NumericalFailure(_))));
    }

    #[test]
    fn l0_oracle_examples() {
        let prob = problem(1, 2, &[1.0, 2.0], &[2.0]);
        let x = l0_oracle(&prob, 20).unwrap();
        assert_eq!(x.as_slice(), &[2.0, 0.0]);
        let prob = problem(1, 2, &[1.0, 2.0], &[0.0]);
        assert_eq!(l0_oracle(&prob, 20).unwrap().as_slice(), &[0.0, 0.0]);
        assert!(l0_oracle(&prob, 1).is_err());
        let inconsistent = problem(2, 2, &[1.0, 1.0, 1.0, 1.0], &[1.0, 2.0]);
        assert!(matches!(l0_oracle(&inconsistent, 20), Err(Error::Infeasible(_))));
    }

    #[test]
    fn l0_oracle_finds_planted_support() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let f = gaussian(6, 8, &mut rng);
            let mut x0 = DVector::zeros(8);
            x0[1] = 0.7;
            x0[5] = -1.9;
            let prob = EqualityConstrainedL1Problem::new(f.clone(), &f * &x0).unwrap();
            assert!((l0_oracle(&prob, 8).unwrap() - &x0).amax() < 1e-9);
        }
    }
}
