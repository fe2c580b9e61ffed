use nalgebra::DMatrix;

use super::{Basis, DiscreteOperator};
use crate::geometry::Domain;
use crate::quadrature::{gauss_jacobi, JacobiFamily, Rule};
use crate::special::{check_order, lgamma};
use crate::{Error, Result};

/// The basis `(1 - y²)^s p̂_k(y)`, `k < n`, with `p̂_k` orthonormal for the weight
/// `(1 - y²)^s` and `y` the affine coordinate of the interval `(a, b)` onto `(-1, 1)`.
#[derive(Debug, Clone)]
pub struct SpectralInfo {
    pub s: f64,
    pub n: usize,
    pub a: f64,
    pub b: f64,
    family: JacobiFamily,
}

impl SpectralInfo {
    pub fn new(s: f64, n: usize, a: f64, b: f64) -> Self {
        SpectralInfo { s, n, a, b, family: JacobiFamily::new(s, s, n + 1) }
    }

    pub fn half_length(&self) -> f64 {
        0.5 * (self.b - self.a)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn to_reference(&self, x: f64) -> f64 {
        (x - self.midpoint()) / self.half_length()
    }

    /// `p̂_0(y), …, p̂_{n-1}(y)`.
    pub fn polynomials(&self, y: f64, out: &mut Vec<f64>) {
        self.family.eval_all(y, self.n - 1, out);
    }

    /// Polynomial part `p(y) = Σ c_k p̂_k(y)` of an expansion.
    pub fn polynomial_part(&self, coeffs: &[f64], y: f64) -> f64 {
        let mut buf = Vec::with_capacity(self.n);
        self.polynomials(y, &mut buf);
        buf.iter().zip(coeffs).map(|(p, c)| p * c).sum()
    }

    /// `u(x) = (1 - y²)^s p(y)`, zero outside the interval.
    pub fn eval(&self, coeffs: &[f64], x: f64) -> f64 {
        let y = self.to_reference(x);
        if y.abs() >= 1.0 {
            return 0.0;
        }
        (1.0 - y * y).powf(self.s) * self.polynomial_part(coeffs, y)
    }

    /// Same as [`eval`](Self::eval) but with the distances `1 + y`, `1 - y` supplied
    /// separately to avoid cancellation next to the endpoints.
    pub fn eval_ref(&self, coeffs: &[f64], y: f64, one_plus: f64, one_minus: f64) -> f64 {
        (one_plus * one_minus).powf(self.s) * self.polynomial_part(coeffs, y)
    }

    /// `∫_a^b f u_i u_j dx` for all basis pairs.
    pub fn weighted_mass(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let rule = gauss_jacobi(self.n + 32, 2.0 * self.s, 2.0 * self.s);
        self.weighted_mass_with(&rule, f)
    }

    fn weighted_mass_with(&self, rule: &Rule, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let l = self.half_length();
        let mut m = DMatrix::zeros(self.n, self.n);
        let mut buf = Vec::with_capacity(self.n);
        for (&y, &w) in rule.nodes.iter().zip(&rule.weights) {
            self.polynomials(y, &mut buf);
            let wf = w * l * f(self.midpoint() + l * y);
            for i in 0..self.n {
                let bi = wf * buf[i];
                for j in 0..=i {
                    m[(i, j)] += bi * buf[j];
                }
            }
        }
        for i in 0..self.n {
            for j in 0..i {
                m[(j, i)] = m[(i, j)];
            }
        }
        m
    }

    /// Diagonal action `(-Δ)^s[(1 - y²)^s P_k^{(s,s)}] = Γ(2s + k + 1)/k! · P_k^{(s,s)}` on
    /// `(-1, 1)`.
    pub fn reference_eigenvalue(&self, k: usize) -> f64 {
        (lgamma(2.0 * self.s + k as f64 + 1.0) - lgamma(k as f64 + 1.0)).exp()
    }
}

/// Weighted-polynomial spectral discretization on an interval. The stiffness is diagonal
/// because each basis function is an eigenfunction of `(-Δ)^s` against the weight; the
/// mass is computed with the Gauss-Jacobi rule for `(1 - y²)^{2s}`.
pub fn assemble_1d_spectral(s: f64, n: usize, interval: &Domain) -> Result<DiscreteOperator> {
    check_order(s)?;
    if n < 2 {
        return Err(Error::InvalidArgument(format!("basis size {n} < 2")));
    }
    let (a, b) = match interval {
        Domain::Interval { a, b } => (*a, *b),
        _ => return Err(Error::InvalidDomain("spectral basis needs an interval".into())),
    };
    let info = SpectralInfo::new(s, n, a, b);
    let l = info.half_length();
    let scale = l.powf(1.0 - 2.0 * s);
    let stiffness =
        DMatrix::from_fn(n, n, |i, j| if i == j { scale * info.reference_eigenvalue(i) } else { 0.0 });
    let rule = gauss_jacobi(n + 2, 2.0 * s, 2.0 * s);
    let mass = info.weighted_mass_with(&rule, |_| 1.0);
    Ok(DiscreteOperator::new(stiffness, mass, Basis::Spectral1d(info)))
}
