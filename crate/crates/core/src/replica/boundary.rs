use serde::{Deserialize, Serialize};

use super::threshold::{alpha_c, l1_alpha_c_from};
use super::worst_case::worst_case_alpha_from;
use crate::error::{domain, Error, Result};
use crate::scalar_maps::Norm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMethod {
    TypicalRs,
    /// L1 only: the sufficient condition for all sparse signals.
    WorstCase,
}

impl std::fmt::Display for BoundaryMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::TypicalRs => "typical-rs",
            Self::WorstCase => "worst-case",
        })
    }
}

impl std::str::FromStr for BoundaryMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "typical-rs" | "typical" | "rs" => Ok(Self::TypicalRs),
            "worst-case" | "wc" => Ok(Self::WorstCase),
            other => Err(domain(format!("unknown method `{other}` (expected typical-rs or worst-case)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub rho: f64,
    /// `None` where the method gives no rate in `(0, 1]`.
    pub alpha_c: Option<f64>,
    pub at_valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseBoundary {
    pub norm: Norm,
    pub method: BoundaryMethod,
    pub points: Vec<BoundaryPoint>,
}

impl PhaseBoundary {
    pub fn rhos(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.rho).collect()
    }
}

/// Critical rate on each grid point, each bisection seeded from the
/// previous result (both curves are increasing in `rho`).
pub fn trace_boundary(norm: Norm, method: BoundaryMethod, rho_grid: &[f64], tol: f64) -> Result<PhaseBoundary> {
    if let Some(w) = rho_grid.windows(2).find(|w| !(w[0] < w[1])) {
        return Err(domain(format!("rho grid must be strictly increasing, found {} then {}", w[0], w[1])));
    }
    if method == BoundaryMethod::WorstCase && norm != Norm::L1 {
        return Err(domain(format!("the worst-case curve is defined for l1 only, got {norm}")));
    }
    let at = |rho: f64, e: Error| Error::AtPoint { rho, source: Box::new(e) };
    let mut points = Vec::with_capacity(rho_grid.len());
    let mut seed = 0.0;
    for &rho in rho_grid {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(at(rho, domain(format!("rho must lie in (0, 1], got {rho}"))));
        }
        let point = match (method, norm) {
            (BoundaryMethod::WorstCase, _) => {
                let a = worst_case_alpha_from(rho, seed, tol).map_err(|e| at(rho, e))?;
                BoundaryPoint { rho, alpha_c: a, at_valid: true }
            }
            (BoundaryMethod::TypicalRs, Norm::L1) => {
                let a = l1_alpha_c_from(rho, seed.max(rho), tol).map_err(|e| at(rho, e))?;
                BoundaryPoint { rho, alpha_c: Some(a), at_valid: true }
            }
            (BoundaryMethod::TypicalRs, _) => {
                let (a, ok) = alpha_c(rho, norm, tol).map_err(|e| at(rho, e))?;
                BoundaryPoint { rho, alpha_c: Some(a), at_valid: ok }
            }
        };
        if let Some(a) = point.alpha_c {
            seed = a;
        }
        points.push(point);
    }
    Ok(PhaseBoundary { norm, method, points })
}
