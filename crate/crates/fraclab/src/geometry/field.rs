use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{Domain, Point};

/// Width of the inward and outward cutoff of boundary-normal fields, relative to the
/// local radius.
pub const NORMAL_FIELD_WIDTH: f64 = 0.4;
const NORM_SAMPLES: usize = 4096;
const NORM_SAFETY: f64 = 1.05;

/// Closed-form families of C¹ vector fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FieldKind {
    /// `x ↦ c + A x`; translations and the dilation `ψ = x` live here.
    Affine { c: Point, a: [[f64; 2]; 2] },
    /// `g(θ) η(|x - c| / r(θ)) N(θ)` for the star domain `domain`, with
    /// `g(θ) = cos[0] + Σ cos[k] cos kθ + sin[k-1] sin kθ` and a smooth bump `η` equal to
    /// one on the boundary and vanishing for `|ρ - 1| ≥ width`.
    NormalFourier { domain: Domain, cos: Vec<f64>, sin: Vec<f64>, width: f64 },
    /// One-dimensional `P((x - center)/radius) η((x - center)/radius)` with
    /// `P(u) = Σ coeffs[k] u^k` and the bump `η(u) = exp(1 - 1/(1 - u²))`.
    Bump1d { center: f64, radius: f64, coeffs: Vec<f64> },
}

/// A perturbation field `t·ψ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationField {
    #[serde(flatten)]
    pub kind: FieldKind,
    pub amplitude: f64,
}

fn bump(u: f64) -> (f64, f64) {
    let q = 1.0 - u * u;
    // below this the bump and its derivative are under 1e-40
    if q <= 0.01 {
        return (0.0, 0.0);
    }
    let e = (1.0 - 1.0 / q).exp();
    (e, -2.0 * u / (q * q) * e)
}

fn trig_series(cos: &[f64], sin: &[f64], theta: f64) -> (f64, f64) {
    let (mut g, mut g1) = (0.0, 0.0);
    for (k, &c) in cos.iter().enumerate() {
        let kf = k as f64;
        let (sn, cs) = (kf * theta).sin_cos();
        g += c * cs;
        g1 -= c * kf * sn;
    }
    for (j, &c) in sin.iter().enumerate() {
        let kf = (j + 1) as f64;
        let (sn, cs) = (kf * theta).sin_cos();
        g += c * sn;
        g1 += c * kf * cs;
    }
    (g, g1)
}

fn spectral_norm(m: [[f64; 2]; 2]) -> f64 {
    let a = m[0][0] * m[0][0] + m[1][0] * m[1][0];
    let b = m[0][0] * m[0][1] + m[1][0] * m[1][1];
    let d = m[0][1] * m[0][1] + m[1][1] * m[1][1];
    let tr = 0.5 * (a + d);
    let disc = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    (tr + disc).max(0.0).sqrt()
}

impl PerturbationField {
    pub fn new(kind: FieldKind, amplitude: f64) -> Self {
        PerturbationField { kind, amplitude }
    }

    pub fn zero() -> Self {
        Self::new(FieldKind::Affine { c: [0.0, 0.0], a: [[0.0; 2]; 2] }, 0.0)
    }

    /// `ψ = t·x`.
    pub fn dilation(t: f64) -> Self {
        Self::new(FieldKind::Affine { c: [0.0, 0.0], a: [[1.0, 0.0], [0.0, 1.0]] }, t)
    }

    /// `ψ = t·c`.
    pub fn translation(c: Point, t: f64) -> Self {
        Self::new(FieldKind::Affine { c, a: [[0.0; 2]; 2] }, t)
    }

    pub fn affine(c: Point, a: [[f64; 2]; 2], t: f64) -> Self {
        Self::new(FieldKind::Affine { c, a }, t)
    }

    /// Boundary-normal field with profile `g` on a star domain.
    pub fn normal_fourier(domain: &Domain, cos: Vec<f64>, sin: Vec<f64>, t: f64) -> Self {
        Self::new(
            FieldKind::NormalFourier { domain: domain.clone(), cos, sin, width: NORMAL_FIELD_WIDTH },
            t,
        )
    }

    /// `cos(kθ)` (or `sin(kθ)` when `sine`) normal field.
    pub fn normal_mode(domain: &Domain, k: usize, sine: bool, t: f64) -> Self {
        let (mut cos, mut sin) = (vec![0.0; k + 1], vec![]);
        if sine {
            sin = vec![0.0; k];
            sin[k - 1] = 1.0;
            cos.truncate(1);
        } else {
            cos[k] = 1.0;
        }
        Self::normal_fourier(domain, cos, sin, t)
    }

    pub fn bump_1d(center: f64, radius: f64, coeffs: Vec<f64>, t: f64) -> Self {
        Self::new(FieldKind::Bump1d { center, radius, coeffs }, t)
    }

    /// Same field with amplitude `t`.
    pub fn with_amplitude(&self, t: f64) -> Self {
        Self { kind: self.kind.clone(), amplitude: t }
    }

    pub fn is_zero(&self) -> bool {
        if self.amplitude == 0.0 {
            return true;
        }
        match &self.kind {
            FieldKind::Affine { c, a } => {
                c.iter().chain(a.iter().flatten()).all(|&v| v == 0.0)
            }
            FieldKind::NormalFourier { cos, sin, .. } => cos.iter().chain(sin).all(|&v| v == 0.0),
            FieldKind::Bump1d { coeffs, .. } => coeffs.iter().all(|&v| v == 0.0),
        }
    }

    /// Whether the field vanishes outside a bounded set.
    pub fn is_compact(&self) -> bool {
        !matches!(self.kind, FieldKind::Affine { .. }) || self.is_zero()
    }

    pub fn value(&self, x: Point) -> Point {
        self.value_and_jacobian(x).0
    }

    pub fn jacobian(&self, x: Point) -> [[f64; 2]; 2] {
        self.value_and_jacobian(x).1
    }

    pub fn divergence(&self, x: Point) -> f64 {
        let j = self.jacobian(x);
        j[0][0] + j[1][1]
    }

    /// `(ψ(x), Dψ(x))` with `Dψ[i][j] = ∂ψ_i/∂x_j`.
    pub fn value_and_jacobian(&self, x: Point) -> (Point, [[f64; 2]; 2]) {
        let t = self.amplitude;
        let zero = ([0.0; 2], [[0.0; 2]; 2]);
        if t == 0.0 {
            return zero;
        }
        match &self.kind {
            FieldKind::Affine { c, a } => (
                [
                    t * (c[0] + a[0][0] * x[0] + a[0][1] * x[1]),
                    t * (c[1] + a[1][0] * x[0] + a[1][1] * x[1]),
                ],
                [[t * a[0][0], t * a[0][1]], [t * a[1][0], t * a[1][1]]],
            ),
            FieldKind::Bump1d { center, radius, coeffs } => {
                let u = (x[0] - center) / radius;
                let (e, e1) = bump(u);
                if e == 0.0 {
                    return zero;
                }
                let (mut p, mut p1) = (0.0, 0.0);
                for &c in coeffs.iter().rev() {
                    p1 = p1 * u + p;
                    p = p * u + c;
                }
                ([t * p * e, 0.0], [[t * (p1 * e + p * e1) / radius, 0.0], [0.0, 0.0]])
            }
            FieldKind::NormalFourier { domain, cos, sin, width } => {
                let c = domain.center();
                let v = [x[0] - c[0], x[1] - c[1]];
                let r = v[0].hypot(v[1]);
                if r < 1e-300 {
                    return zero;
                }
                let th = v[1].atan2(v[0]);
                let (rr, r1, r2) = domain.radius_derivatives(th);
                let rho = r / rr;
                let (e, e1) = bump((rho - 1.0) / width);
                if e == 0.0 {
                    return zero;
                }
                let eta_rho = e1 / width;
                let (g, g1) = trig_series(cos, sin, th);
                let (sn, cs) = th.sin_cos();
                let tv = [r1 * cs - rr * sn, r1 * sn + rr * cs];
                let tp = [r2 * cs - 2.0 * r1 * sn - rr * cs, r2 * sn + 2.0 * r1 * cs - rr * sn];
                let tl = tv[0].hypot(tv[1]);
                let nraw = [tv[1], -tv[0]];
                let nraw1 = [tp[1], -tp[0]];
                let tdot = tv[0] * tp[0] + tv[1] * tp[1];
                let n = [nraw[0] / tl, nraw[1] / tl];
                let n1 = [
                    nraw1[0] / tl - nraw[0] * tdot / tl.powi(3),
                    nraw1[1] / tl - nraw[1] * tdot / tl.powi(3),
                ];
                let grad_th = [-v[1] / (r * r), v[0] / (r * r)];
                let grad_r = [v[0] / r, v[1] / r];
                let grad_rho = [
                    grad_r[0] / rr - r * r1 / (rr * rr) * grad_th[0],
                    grad_r[1] / rr - r * r1 / (rr * rr) * grad_th[1],
                ];
                let mut jac = [[0.0; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        jac[i][j] = t
                            * (n[i] * (g1 * e * grad_th[j] + g * eta_rho * grad_rho[j])
                                + g * e * n1[i] * grad_th[j]);
                    }
                }
                ([t * g * e * n[0], t * g * e * n[1]], jac)
            }
        }
    }

    /// Sample points covering the region where the field matters for `domain`.
    fn norm_samples(&self, domain: &Domain) -> Vec<Point> {
        match &self.kind {
            FieldKind::Bump1d { center, radius, .. } => (0..NORM_SAMPLES)
                .map(|k| [center + radius * (2.0 * (k as f64 + 0.5) / NORM_SAMPLES as f64 - 1.0), 0.0])
                .collect(),
            FieldKind::NormalFourier { domain: d, width, .. } => {
                let c = d.center();
                let (nt, nr) = (128, NORM_SAMPLES / 128);
                let mut pts = Vec::with_capacity(NORM_SAMPLES);
                for i in 0..nt {
                    let th = TAU * i as f64 / nt as f64;
                    let rr = d.radius(th);
                    for j in 0..nr {
                        let rho = 1.0 + width * (2.0 * (j as f64 + 0.5) / nr as f64 - 1.0);
                        pts.push([c[0] + rho * rr * th.cos(), c[1] + rho * rr * th.sin()]);
                    }
                }
                pts
            }
            FieldKind::Affine { .. } => {
                let c = domain.center();
                let r = 1.5 * domain.max_radius();
                if domain.dim() == 1 {
                    (0..NORM_SAMPLES)
                        .map(|k| [c[0] + r * (2.0 * k as f64 / (NORM_SAMPLES - 1) as f64 - 1.0), 0.0])
                        .collect()
                } else {
                    let m = 64;
                    let mut pts = Vec::with_capacity(m * m);
                    for i in 0..m {
                        for j in 0..m {
                            pts.push([
                                c[0] + r * (2.0 * i as f64 / (m - 1) as f64 - 1.0),
                                c[1] + r * (2.0 * j as f64 / (m - 1) as f64 - 1.0),
                            ]);
                        }
                    }
                    pts
                }
            }
        }
    }

    /// Upper bound for `max(sup|ψ|, sup‖Dψ‖₂)` near `domain`: dense sampling times 1.05.
    /// Affine fields are measured on a neighborhood of radius 1.5 × the domain radius.
    pub fn c1_norm_bound(&self, domain: &Domain) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let mut m: f64 = 0.0;
        for x in self.norm_samples(domain) {
            let (v, j) = self.value_and_jacobian(x);
            m = m.max(v[0].hypot(v[1])).max(spectral_norm(j));
        }
        NORM_SAFETY * m
    }

    /// Fourier degree of the boundary profile (zero for other families).
    pub fn degree(&self) -> usize {
        match &self.kind {
            FieldKind::NormalFourier { cos, sin, .. } => (cos.len().max(1) - 1).max(sin.len()),
            _ => 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_jacobian(f: &PerturbationField, x: Point) -> [[f64; 2]; 2] {
        let h = 1e-6;
        let mut j = [[0.0; 2]; 2];
        for c in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[c] += h;
            xm[c] -= h;
            let (vp, vm) = (f.value(xp), f.value(xm));
            for r in 0..2 {
                j[r][c] = (vp[r] - vm[r]) / (2.0 * h);
            }
        }
        j
    }

    #[test]
    fn normal_field_jacobian_matches_differences() {
        let d = Domain::star([0.1, -0.2], vec![1.0, 0.1, 0.05], vec![0.08]).unwrap();
        let f = PerturbationField::normal_fourier(&d, vec![0.3, 0.0, 1.0], vec![0.0, 0.0, 0.5], 0.7);
        for x in [[0.9, 0.3], [-0.6, -0.9], [0.2, 0.85], [1.2, -0.1]] {
            let j = f.jacobian(x);
            let fd = fd_jacobian(&f, x);
            for r in 0..2 {
                for c in 0..2 {
                    assert!((j[r][c] - fd[r][c]).abs() < 1e-7, "{x:?} {r}{c}");
                }
            }
        }
    }

    #[test]
    fn normal_field_is_normal_on_the_boundary() {
        let d = Domain::disk([0.0, 0.0], 1.0).unwrap();
        let f = PerturbationField::normal_mode(&d, 2, false, 1.0);
        for k in 0..16 {
            let th = TAU * k as f64 / 16.0;
            let v = f.value([th.cos(), th.sin()]);
            let g = (2.0 * th).cos();
            assert!((v[0] - g * th.cos()).abs() < 1e-14 && (v[1] - g * th.sin()).abs() < 1e-14);
        }
        assert_eq!(f.value([0.5, 0.0]), [0.0, 0.0]);
    }

    #[test]
    fn bump_field_derivative() {
        let f = PerturbationField::bump_1d(0.2, 1.5, vec![0.5, -1.0, 0.3], 0.1);
        for x in [-1.0, -0.3, 0.4, 1.1] {
            let h = 1e-6;
            let fd = (f.value([x + h, 0.0])[0] - f.value([x - h, 0.0])[0]) / (2.0 * h);
            assert!((f.jacobian([x, 0.0])[0][0] - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn spectral_norm_of_rotation() {
        let m = [[0.0, -2.0], [2.0, 0.0]];
        assert!((spectral_norm(m) - 2.0).abs() < 1e-14);
    }
}
