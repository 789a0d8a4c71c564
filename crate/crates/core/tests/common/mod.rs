#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Minimum L1 norm over `F x = y` by enumerating every column subset whose
/// columns are independent and whose span contains `y`. The optimum of the
/// linear program is attained at such a basic solution.
pub fn basic_solution_oracle(f: &DMatrix<f64>, y: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
    let (p, n) = f.shape();
    assert!(n <= 16, "enumeration is exponential in n");
    if y.amax() == 0.0 {
        return Some((0.0, DVector::zeros(n)));
    }
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let cols: Vec<usize> = (0..n).filter(|j| mask >> j & 1 == 1).collect();
        if cols.len() > p {
            continue;
        }
        let sub = f.select_columns(&cols);
        let qr = sub.clone().qr();
        let r = qr.r();
        if (0..cols.len()).any(|i| r[(i, i)].abs() < 1e-10) {
            continue;
        }
        let rhs = qr.q().transpose() * y;
        let Some(coef) = r.solve_upper_triangular(&rhs) else { continue };
        if (&sub * &coef - y).amax() > 1e-9 * (1.0 + y.amax()) {
            continue;
        }
        let obj = coef.lp_norm(1);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            let mut x = DVector::zeros(n);
            for (k, &j) in cols.iter().enumerate() {
                x[j] = coef[k];
            }
            best = Some((obj, x));
        }
    }
    best
}

/// Central differences of the free energy in each of the six order
/// parameters, with steps relative to the coordinate.
pub fn fd_gradient(
    theta: &lpcrit_core::OrderParameters,
    params: &lpcrit_core::ModelParams,
    rule: &lpcrit_core::QuadratureRule,
) -> [f64; 6] {
    let base = theta.to_array();
    let mut g = [0.0; 6];
    for i in 0..6 {
        let h = 1e-5 * base[i].abs().max(1e-8);
        let (mut up, mut down) = (base, base);
        up[i] += h;
        down[i] -= h;
        let fu = lpcrit_core::free_energy(&lpcrit_core::OrderParameters::from_array(up), params, rule).unwrap();
        let fd = lpcrit_core::free_energy(&lpcrit_core::OrderParameters::from_array(down), params, rule).unwrap();
        g[i] = (fu - fd) / (2.0 * h);
    }
    g
}
