//! Gamma-function helpers and the normalization constant of the fractional Laplacian.

use statrs::function::gamma::{gamma, ln_gamma};

use crate::{Error, Result};

pub use statrs::function::gamma::gamma as gamma_fn;
pub use statrs::function::gamma::ln_gamma as ln_gamma_fn;

/// Rejects orders outside the open unit interval.
pub fn check_order(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidOrder(s))
    }
}

/// `C_{n,s} = s 4^s Γ(s + n/2) / (π^{n/2} Γ(1 - s))`, the constant that makes the
/// singular-integral definition agree with the Fourier symbol `|ξ|^{2s}`.
pub fn fractional_constant(n: usize, s: f64) -> f64 {
    let nh = n as f64 / 2.0;
    s * 4f64.powf(s) * gamma(s + nh) / (std::f64::consts::PI.powf(nh) * gamma(1.0 - s))
}

/// `Γ(1+s)²`, the constant in front of every boundary integral of `(u/δ^s)²`.
pub fn boundary_constant(s: f64) -> f64 {
    let g = gamma(1.0 + s);
    g * g
}

/// Constant `κ` of the boundary representation formula on a ball of radius `r` in
/// dimension `n`:
/// `(u/δ^s)(z) = κ ∫ f(y) (r² - |y - c|²)^s |z - y|^{-n} dy` whenever
/// `(-Δ)^s u = f` in the ball and `u = 0` outside.
pub fn ball_trace_constant(n: usize, s: f64, r: f64) -> f64 {
    let nh = n as f64 / 2.0;
    let green = gamma(nh)
        / (4f64.powf(s) * std::f64::consts::PI.powf(nh) * gamma(s) * gamma(s));
    green * 2f64.powf(s) / (s * r.powf(s))
}

/// `ln Γ(x)`.
pub fn lgamma(x: f64) -> f64 {
    ln_gamma(x)
}
