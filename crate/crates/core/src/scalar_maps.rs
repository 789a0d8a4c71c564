//! Single-site quantities of the zero-temperature cavity problem.
//!
//! A site with effective curvature `qhat` in a local field `h` minimises
//! `qhat/2 x^2 - h x + |x|^p`, where `|x|^0` is the indicator of `x != 0`.
//! For the three supported exponents the minimiser and the minimum have
//! closed forms, so nothing here depends on a numerical limit in the exponent.
//!
//! The module also carries the Gaussian tail function and the quadrature
//! rules used for averages over the standard normal measure `Dz`.

use std::fmt;
use std::num::NonZeroUsize;
use std::str::FromStr;

use gauss_quad::hermite::GaussHermite;
use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// The exponent of the reconstruction cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    /// Number of non-zero entries.
    L0,
    /// Sum of absolute values.
    L1,
    /// Sum of squares.
    L2,
}

impl Norm {
    pub const ALL: [Norm; 3] = [Norm::L0, Norm::L1, Norm::L2];

    /// Field magnitude below which the minimiser is exactly zero, if any.
    pub fn threshold(self, qhat: f64) -> Option<f64> {
        match self {
            Norm::L0 => Some((2.0 * qhat).sqrt()),
            Norm::L1 => Some(1.0),
            Norm::L2 => None,
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::L0 => "l0",
            Norm::L1 => "l1",
            Norm::L2 => "l2",
        })
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l0" | "0" => Ok(Norm::L0),
            "l1" | "1" => Ok(Norm::L1),
            "l2" | "2" => Ok(Norm::L2),
            other => Err(domain(format!("unknown norm '{other}' (expected l0, l1 or l2)"))),
        }
    }
}

/// Local field and curvature seen by a single site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityField {
    pub h: f64,
    pub qhat: f64,
}

impl CavityField {
    pub fn new(h: f64, qhat: f64) -> Result<Self> {
        if !(qhat > 0.0) || !qhat.is_finite() {
            return Err(domain(format!("qhat must be positive and finite, got {qhat}")));
        }
        if !h.is_finite() {
            return Err(domain(format!("field must be finite, got {h}")));
        }
        Ok(Self { h, qhat })
    }
}

/// Minimum value of the single-site cost.
pub fn phi(field: CavityField, norm: Norm) -> f64 {
    let CavityField { h, qhat } = field;
    match norm {
        Norm::L0 => {
            if h.abs() <= (2.0 * qhat).sqrt() {
                0.0
            } else {
                1.0 - h * h / (2.0 * qhat)
            }
        }
        Norm::L1 => {
            let excess = h.abs() - 1.0;
            if excess <= 0.0 {
                0.0
            } else {
                -excess * excess / (2.0 * qhat)
            }
        }
        Norm::L2 => -h * h / (2.0 * (qhat + 2.0)),
    }
}

/// Minimiser of the single-site cost. Equals `-d phi / d h` away from thresholds.
pub fn x_star(field: CavityField, norm: Norm) -> f64 {
    let CavityField { h, qhat } = field;
    match norm {
        Norm::L0 => {
            if h.abs() > (2.0 * qhat).sqrt() {
                h / qhat
            } else {
                0.0
            }
        }
        Norm::L1 => {
            if h.abs() > 1.0 {
                (h - h.signum()) / qhat
            } else {
                0.0
            }
        }
        Norm::L2 => h / (qhat + 2.0),
    }
}

/// Derivative of [`x_star`] in `h`, taking the dead-zone value exactly at a threshold.
///
/// For `L0` this is only the regular part: the jump of the minimiser at the
/// threshold is not represented here.
pub fn x_star_slope(field: CavityField, norm: Norm) -> f64 {
    let CavityField { h, qhat } = field;
    match norm.threshold(qhat) {
        Some(t) if h.abs() <= t => 0.0,
        Some(_) => 1.0 / qhat,
        None => 1.0 / (qhat + 2.0),
    }
}

/// Upper tail of the standard normal distribution, `H(x) = P(Z > x)`.
pub fn gauss_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn gauss_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse of [`gauss_tail`] on `(0, 1)`.
pub fn gauss_tail_inv(p: f64) -> f64 {
    std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p)
}

pub const DEFAULT_ORDER: usize = 201;

/// Truncation of the real line used by piecewise rules; `H(12) < 2e-33`.
const TAIL_CUTOFF: f64 = 12.0;
const PANEL_WIDTH: f64 = 1.5;
const PANEL_ORDER: usize = 20;

/// Gauss–Hermite rule normalised to the standard normal measure.
///
/// Also carries a Gauss–Legendre panel rule used by [`expect_dz_split`] when
/// an integrand has kinks or jumps at known points.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    order: usize,
    panel: Vec<(f64, f64)>,
}

impl QuadratureRule {
    pub fn gauss_hermite(order: usize) -> Result<Self> {
        let n = NonZeroUsize::new(order).ok_or_else(|| domain("quadrature order must be positive"))?;
        let mut pairs: Vec<(f64, f64)> = GaussHermite::new(n)
            .iter()
            .map(|(x, w)| (x * std::f64::consts::SQRT_2, w / std::f64::consts::PI.sqrt()))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Golub–Welsch leaves ~1e-14 asymmetry; fold it out.
        for i in 0..order / 2 {
            let j = order - 1 - i;
            let x = 0.5 * (pairs[j].0 - pairs[i].0);
            let w = 0.5 * (pairs[i].1 + pairs[j].1);
            pairs[i] = (-x, w);
            pairs[j] = (x, w);
        }
        if order % 2 == 1 {
            pairs[order / 2].0 = 0.0;
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let (nodes, weights) = pairs.into_iter().map(|(x, w)| (x, w / total)).unzip();

        let panel = GaussLegendre::new(NonZeroUsize::new(PANEL_ORDER).unwrap())
            .iter()
            .map(|(x, w)| (*x, *w))
            .collect();
        Ok(Self { nodes, weights, order, panel })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn order(&self) -> usize {
        self.order
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::gauss_hermite(DEFAULT_ORDER).expect("default order is positive")
    }
}

/// `E[f(z)]` for standard normal `z` using the Gauss–Hermite nodes.
///
/// Exact for polynomials of degree below `2 * order`; converges slowly for
/// integrands that are not smooth, see [`expect_dz_split`].
pub fn expect_dz(f: impl Fn(f64) -> f64, rule: &QuadratureRule) -> f64 {
    rule.nodes.iter().zip(&rule.weights).map(|(&z, &w)| w * f(z)).sum()
}

/// `E[f(z)]` with the real line cut at `breakpoints`, each piece integrated by
/// Gauss–Legendre panels against the normal density.
pub fn expect_dz_split(f: impl Fn(f64) -> f64, breakpoints: &[f64], rule: &QuadratureRule) -> f64 {
    expect_dz_split_many(|z| [f(z)], breakpoints, rule)[0]
}

pub(crate) fn expect_dz_split_many<const K: usize>(
    f: impl Fn(f64) -> [f64; K],
    breakpoints: &[f64],
    rule: &QuadratureRule,
) -> [f64; K] {
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|b| b.is_finite() && b.abs() < TAIL_CUTOFF)
        .collect();
    cuts.push(-TAIL_CUTOFF);
    cuts.push(TAIL_CUTOFF);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut acc = [0.0; K];
    for seg in cuts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let pieces = ((b - a) / PANEL_WIDTH).ceil().max(1.0) as usize;
        let width = (b - a) / pieces as f64;
        for k in 0..pieces {
            let lo = a + k as f64 * width;
            let half = 0.5 * width;
            let mid = lo + half;
            for &(t, w) in &rule.panel {
                let z = mid + half * t;
                let weight = w * half * gauss_density(z);
                let values = f(z);
                for (slot, v) in acc.iter_mut().zip(values) {
                    *slot += weight * v;
                }
            }
        }
    }
    acc
}
