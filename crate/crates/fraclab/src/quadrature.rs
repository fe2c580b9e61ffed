//! Orthonormal Jacobi polynomials, Gauss rules and double-exponential quadrature.
//!
//! Gauss nodes come from the Golub-Welsch eigenproblem, polished by Newton steps on the
//! orthonormal recurrence; weights come from the Christoffel function, which keeps them
//! accurate near the endpoints.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::special::lgamma;

/// Three-term recurrence of the orthonormal Jacobi polynomials for the weight
/// `(1-x)^α (1+x)^β` on `(-1, 1)`.
#[derive(Debug, Clone)]
pub struct JacobiFamily {
    pub alpha: f64,
    pub beta: f64,
    /// diagonal recurrence coefficients `a_n`
    a: Vec<f64>,
    /// off-diagonal coefficients `b_n`, `b[0]` unused
    b: Vec<f64>,
    /// `p_0 = 1/sqrt(μ_0)`
    p0: f64,
}

impl JacobiFamily {
    pub fn new(alpha: f64, beta: f64, degree: usize) -> Self {
        assert!(alpha > -1.0 && beta > -1.0, "Jacobi parameters must exceed -1");
        let ab = alpha + beta;
        let mut a = Vec::with_capacity(degree + 1);
        let mut b = vec![0.0; degree + 2];
        for n in 0..=degree {
            let nf = n as f64;
            let an = if n == 0 {
                (beta - alpha) / (ab + 2.0)
            } else {
                (beta * beta - alpha * alpha) / ((2.0 * nf + ab) * (2.0 * nf + ab + 2.0))
            };
            a.push(an);
        }
        for (n, bn) in b.iter_mut().enumerate().skip(1) {
            let nf = n as f64;
            *bn = if n == 1 {
                (4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab).powi(2) * (3.0 + ab))).sqrt()
            } else {
                let t = 2.0 * nf + ab;
                (4.0 * nf * (nf + alpha) * (nf + beta) * (nf + ab)
                    / (t * t * (t + 1.0) * (t - 1.0)))
                    .sqrt()
            };
        }
        let ln_mu0 = (ab + 1.0) * std::f64::consts::LN_2 + lgamma(alpha + 1.0) + lgamma(beta + 1.0)
            - lgamma(ab + 2.0);
        JacobiFamily { alpha, beta, a, b, p0: (-0.5 * ln_mu0).exp() }
    }

    pub fn degree(&self) -> usize {
        self.a.len() - 1
    }

    /// Total mass `μ_0 = ∫ (1-x)^α (1+x)^β dx`.
    pub fn mu0(&self) -> f64 {
        1.0 / (self.p0 * self.p0)
    }

    /// Values `p_0(x), …, p_m(x)` of the orthonormal polynomials, `m ≤ degree`.
    pub fn eval_all(&self, x: f64, m: usize, out: &mut Vec<f64>) {
        out.clear();
        out.push(self.p0);
        if m == 0 {
            return;
        }
        out.push((x - self.a[0]) * self.p0 / self.b[1]);
        for n in 1..m {
            let next = ((x - self.a[n]) * out[n] - self.b[n] * out[n - 1]) / self.b[n + 1];
            out.push(next);
        }
    }

    /// Value and derivative of `p_m` at `x`.
    fn eval_with_derivative(&self, x: f64, m: usize) -> (f64, f64) {
        let (mut p_prev, mut p) = (0.0, self.p0);
        let (mut d_prev, mut d) = (0.0, 0.0);
        for n in 0..m {
            let bprev = if n == 0 { 0.0 } else { self.b[n] };
            let pn = ((x - self.a[n]) * p - bprev * p_prev) / self.b[n + 1];
            let dn = (p + (x - self.a[n]) * d - bprev * d_prev) / self.b[n + 1];
            p_prev = p;
            p = pn;
            d_prev = d;
            d = dn;
        }
        (p, d)
    }

    /// `n`-point Gauss rule for the weight of this family (requires `n ≤ degree + 1`).
    pub fn gauss(&self, n: usize) -> Rule {
        assert!(n >= 1 && n <= self.degree() + 1, "family degree too small for rule");
        let mut jac = DMatrix::zeros(n, n);
        for i in 0..n {
            jac[(i, i)] = self.a[i];
            if i + 1 < n {
                jac[(i, i + 1)] = self.b[i + 1];
                jac[(i + 1, i)] = self.b[i + 1];
            }
        }
        let mut nodes: Vec<f64> = SymmetricEigen::new(jac).eigenvalues.iter().copied().collect();
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut buf = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                let (p, d) = self.eval_with_derivative(*x, n);
                if d != 0.0 {
                    let step = p / d;
                    let candidate = *x - step;
                    if candidate > -1.0 && candidate < 1.0 {
                        *x = candidate;
                    }
                    if step.abs() < 1e-16 {
                        break;
                    }
                }
            }
            self.eval_all(*x, n - 1, &mut buf);
            let christoffel: f64 = buf.iter().map(|v| v * v).sum();
            weights.push(1.0 / christoffel);
        }
        Rule { nodes, weights }
    }
}

/// Nodes and weights on `(-1, 1)`.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Sum of `w_i f(x_i)`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Integral of `f` over `(a, b)` for the unweighted (Legendre) rule.
    pub fn integrate_on(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let (m, l) = (0.5 * (a + b), 0.5 * (b - a));
        l * self.integrate(|x| f(m + l * x))
    }
}

/// `n`-point Gauss-Jacobi rule for `(1-x)^α (1+x)^β`.
pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> Rule {
    JacobiFamily::new(alpha, beta, n).gauss(n)
}

/// `n`-point Gauss-Legendre rule.
pub fn gauss_legendre(n: usize) -> Rule {
    gauss_jacobi(n, 0.0, 0.0)
}

/// Tanh-sinh rule on `(-1, 1)`. Each node carries its distances to both endpoints so that
/// integrands with algebraic endpoint singularities can be evaluated without cancellation.
#[derive(Debug, Clone)]
pub struct TanhSinh {
    /// `(x, 1 + x, 1 - x, weight)`
    pub points: Vec<(f64, f64, f64, f64)>,
}

impl TanhSinh {
    /// Step `h` in the `t` variable and truncation `|t| ≤ t_max`.
    pub fn new(h: f64, t_max: f64) -> Self {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let m = (t_max / h).floor() as i64;
        let mut points = Vec::with_capacity((2 * m + 1) as usize);
        for k in -m..=m {
            let t = k as f64 * h;
            let u = half_pi * t.sinh();
            let x = u.tanh();
            // 1 - tanh(u) = 2 / (1 + e^{2u}), computed without cancellation
            let e = (2.0 * u).exp();
            let one_minus = 2.0 / (1.0 + e);
            let one_plus = 2.0 * e / (1.0 + e);
            let w = h * half_pi * t.cosh() / u.cosh().powi(2);
            if w > 0.0 && one_minus > 0.0 && one_plus > 0.0 && w.is_finite() {
                points.push((x, one_plus, one_minus, w));
            }
        }
        TanhSinh { points }
    }

    /// Integral of `f(x, x - a, b - x)` over `(a, b)`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64, f64, f64) -> f64) -> f64 {
        let l = 0.5 * (b - a);
        let mut acc = 0.0;
        for &(_, op, om, w) in &self.points {
            acc += w * f(a + l * op, l * op, l * om);
        }
        l * acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        let r = gauss_legendre(8);
        let v = r.integrate(|x| x.powi(14) + x.powi(3));
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn jacobi_weights_sum_to_mass() {
        for &(a, b) in &[(0.5, 0.5), (-0.5, 0.5), (0.3, 1.2), (1.5, 1.5)] {
            let fam = JacobiFamily::new(a, b, 20);
            let r = fam.gauss(20);
            let total: f64 = r.weights.iter().sum();
            assert!((total / fam.mu0() - 1.0).abs() < 1e-13, "{a} {b}");
        }
    }

    #[test]
    fn orthonormality_under_own_rule() {
        let fam = JacobiFamily::new(0.25, 0.75, 12);
        let r = fam.gauss(12);
        let mut buf = Vec::new();
        let mut g = DMatrix::<f64>::zeros(10, 10);
        for (&x, &w) in r.nodes.iter().zip(&r.weights) {
            fam.eval_all(x, 9, &mut buf);
            for i in 0..10 {
                for j in 0..10 {
                    g[(i, j)] += w * buf[i] * buf[j];
                }
            }
        }
        let err = (g - DMatrix::identity(10, 10)).amax();
        assert!(err < 1e-13, "{err}");
    }

    #[test]
    fn chebyshev_first_kind_nodes() {
        let r = gauss_jacobi(6, -0.5, -0.5);
        for (k, &x) in r.nodes.iter().enumerate() {
            let expect = -((2 * k + 1) as f64 * std::f64::consts::PI / 12.0).cos();
            assert!((x - expect).abs() < 1e-14);
            assert!((r.weights[k] - std::f64::consts::PI / 6.0).abs() < 1e-13);
        }
    }

    #[test]
    fn tanh_sinh_handles_endpoint_singularity() {
        let q = TanhSinh::new(1.0 / 32.0, 4.0);
        // ∫_0^2 (x)^{-1/2} (2-x)^{-1/3} dx = 2^{1/6} B(1/2, 2/3)
        let v = q.integrate(0.0, 2.0, |_, da, db| da.powf(-0.5) * db.powf(-1.0 / 3.0));
        let beta = (lgamma(0.5) + lgamma(2.0 / 3.0) - lgamma(0.5 + 2.0 / 3.0)).exp();
        assert!((v / (2f64.powf(1.0 / 6.0) * beta) - 1.0).abs() < 1e-9, "{v}");
    }
}
