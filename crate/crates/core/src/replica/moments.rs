use crate::scalar_maps::{expect_dz_split_many, phi, x_star, x_star_slope, CavityField, Norm, QuadratureRule};

/// Gaussian averages of single-site quantities at field `h = sigma * z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteMoments {
    /// `E[x*^2]`
    pub x_sq: f64,
    /// `E[z x*] / sigma`, which is `E[dx*/dh]` when `x*` is continuous.
    pub zx_over_sigma: f64,
    /// `E[phi]`
    pub phi: f64,
    /// `E[(dx*/dh)^2]`, regular part only.
    pub slope_sq: f64,
}

impl SiteMoments {
    pub fn compute(norm: Norm, qhat: f64, sigma: f64, rule: &QuadratureRule) -> Self {
        if sigma == 0.0 {
            let s = x_star_slope(CavityField { h: 0.0, qhat }, norm);
            return Self { x_sq: 0.0, zx_over_sigma: s, phi: 0.0, slope_sq: s * s };
        }
        let breaks: Vec<f64> = match norm.threshold(qhat) {
            Some(t) => vec![-t / sigma, t / sigma],
            None => Vec::new(),
        };
        let [x_sq, zx, phi_mean, slope_sq] = expect_dz_split_many(
            |z| {
                let field = CavityField { h: sigma * z, qhat };
                let x = x_star(field, norm);
                let s = x_star_slope(field, norm);
                [x * x, z * x / sigma, phi(field, norm), s * s]
            },
            &breaks,
            rule,
        );
        Self { x_sq, zx_over_sigma: zx, phi: phi_mean, slope_sq }
    }
}
