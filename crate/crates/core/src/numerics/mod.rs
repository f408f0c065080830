//! Special functions and small numerical routines shared by every design.
//!
//! Everything here is a pure function of its arguments.

mod beta;
mod gauss;
mod isotonic;
mod quad;
mod root;

pub use beta::{beta_interval_mass, beta_pdf, ln_beta, ln_gamma, reg_inc_beta, BetaParams};
pub use gauss::{composite_gauss_legendre, gauss_legendre};
pub use isotonic::pava_isotonic;
pub use quad::{integrate, Quadrature};
pub use root::{bisect, DEFAULT_ROOT_TOL};

/// Standard normal density.
pub fn normal_pdf(x: f64, sigma: f64) -> f64 {
    let z = x / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}
