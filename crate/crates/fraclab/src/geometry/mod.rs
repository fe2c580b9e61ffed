//! Domains, boundary quadrature, perturbation fields and composite maps.

mod field;
mod map;

pub use field::{FieldKind, PerturbationField};
pub use map::{compose_maps, CompositeMap};

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A point in the plane. One-dimensional code uses the first coordinate only.
pub type Point = [f64; 2];

/// θ-samples used to validate star-shaped domains.
const SHAPE_CHECK_SAMPLES: usize = 2048;
/// θ-samples used when refitting a pushed-forward boundary.
const REFIT_SAMPLES: usize = 512;
/// Harmonics kept when refitting a pushed-forward boundary.
const REFIT_HARMONICS: usize = 32;

/// The computational domain: an interval or a planar region star-shaped about `center`
/// whose radius is a finite Fourier series
/// `r(θ) = cos[0] + Σ_{k≥1} (cos[k] cos kθ + sin[k-1] sin kθ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Star2d { center: Point, cos: Vec<f64>, sin: Vec<f64> },
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        let d = Domain::Interval { a, b };
        d.validate()?;
        Ok(d)
    }

    pub fn disk(center: Point, radius: f64) -> Result<Self> {
        Domain::star(center, vec![radius], vec![])
    }

    pub fn star(center: Point, cos: Vec<f64>, sin: Vec<f64>) -> Result<Self> {
        let d = Domain::Star2d { center, cos, sin };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::Interval { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(Error::InvalidDomain(format!("interval needs a < b, got ({a}, {b})")));
                }
            }
            Domain::Star2d { center, cos, sin } => {
                if cos.is_empty() {
                    return Err(Error::InvalidDomain("radius series is empty".into()));
                }
                if !center.iter().chain(cos).chain(sin).all(|v| v.is_finite()) {
                    return Err(Error::InvalidDomain("non-finite coefficient".into()));
                }
                let min_r = (0..SHAPE_CHECK_SAMPLES)
                    .map(|k| self.radius(TAU * k as f64 / SHAPE_CHECK_SAMPLES as f64))
                    .fold(f64::INFINITY, f64::min);
                if min_r <= 0.0 {
                    return Err(Error::InvalidDomain(format!("radius reaches {min_r:.3e}")));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Star2d { .. } => 2,
        }
    }

    /// Midpoint of an interval, center of a star domain.
    pub fn center(&self) -> Point {
        match self {
            Domain::Interval { a, b } => [0.5 * (a + b), 0.0],
            Domain::Star2d { center, .. } => *center,
        }
    }

    /// `(r, r', r'')` at angle θ (star domains); half-length for intervals.
    pub fn radius_derivatives(&self, theta: f64) -> (f64, f64, f64) {
        match self {
            Domain::Interval { a, b } => (0.5 * (b - a), 0.0, 0.0),
            Domain::Star2d { cos, sin, .. } => {
                let (mut r, mut r1, mut r2) = (cos[0], 0.0, 0.0);
                for (k, &c) in cos.iter().enumerate().skip(1) {
                    let kf = k as f64;
                    let (sn, cs) = (kf * theta).sin_cos();
                    r += c * cs;
                    r1 -= c * kf * sn;
                    r2 -= c * kf * kf * cs;
                }
                for (j, &c) in sin.iter().enumerate() {
                    let kf = (j + 1) as f64;
                    let (sn, cs) = (kf * theta).sin_cos();
                    r += c * sn;
                    r1 += c * kf * cs;
                    r2 -= c * kf * kf * sn;
                }
                (r, r1, r2)
            }
        }
    }

    pub fn radius(&self, theta: f64) -> f64 {
        self.radius_derivatives(theta).0
    }

    /// Center and radius when the domain is a ball (an interval or a disk).
    pub fn as_ball(&self) -> Option<(Point, f64)> {
        match self {
            Domain::Interval { a, b } => Some(([0.5 * (a + b), 0.0], 0.5 * (b - a))),
            Domain::Star2d { center, cos, sin } => {
                let round = cos.iter().skip(1).chain(sin).all(|&c| c == 0.0);
                round.then_some((*center, cos[0]))
            }
        }
    }

    /// Upper bound for the distance from the center to the boundary.
    pub fn max_radius(&self) -> f64 {
        match self {
            Domain::Interval { a, b } => 0.5 * (b - a),
            Domain::Star2d { cos, sin, .. } => {
                cos[0] + cos.iter().skip(1).chain(sin).map(|c| c.abs()).sum::<f64>()
            }
        }
    }

    /// Boundary point at angle θ.
    pub fn boundary_point(&self, theta: f64) -> Point {
        let c = self.center();
        let r = self.radius(theta);
        [c[0] + r * theta.cos(), c[1] + r * theta.sin()]
    }

    /// Tangent `dp/dθ` of the boundary parametrization.
    pub fn tangent(&self, theta: f64) -> Point {
        let (r, r1, _) = self.radius_derivatives(theta);
        let (sn, cs) = theta.sin_cos();
        [r1 * cs - r * sn, r1 * sn + r * cs]
    }

    /// Outward unit normal at angle θ.
    pub fn normal(&self, theta: f64) -> Point {
        let t = self.tangent(theta);
        let l = t[0].hypot(t[1]);
        [t[1] / l, -t[0] / l]
    }

    pub fn contains(&self, x: Point) -> bool {
        match self {
            Domain::Interval { a, b } => x[0] > *a && x[0] < *b,
            Domain::Star2d { center, .. } => {
                let v = [x[0] - center[0], x[1] - center[1]];
                let r = v[0].hypot(v[1]);
                r < self.radius(v[1].atan2(v[0]))
            }
        }
    }

    /// Trapezoid rule on the boundary (exact for trigonometric polynomials of degree
    /// below `m`); the two endpoints with unit weights for an interval.
    pub fn boundary_quadrature(&self, m: usize) -> BoundaryQuadrature {
        match self {
            Domain::Interval { a, b } => BoundaryQuadrature {
                nodes: vec![[*a, 0.0], [*b, 0.0]],
                weights: vec![1.0, 1.0],
                normals: vec![[-1.0, 0.0], [1.0, 0.0]],
                angles: vec![std::f64::consts::PI, 0.0],
            },
            Domain::Star2d { .. } => {
                let mut q = BoundaryQuadrature {
                    nodes: Vec::with_capacity(m),
                    weights: Vec::with_capacity(m),
                    normals: Vec::with_capacity(m),
                    angles: Vec::with_capacity(m),
                };
                for k in 0..m {
                    let th = TAU * k as f64 / m as f64;
                    let t = self.tangent(th);
                    q.nodes.push(self.boundary_point(th));
                    q.weights.push(t[0].hypot(t[1]) * TAU / m as f64);
                    q.normals.push(self.normal(th));
                    q.angles.push(th);
                }
                q
            }
        }
    }

    /// Dilation about the origin by the factor `r`.
    pub fn scaled(&self, r: f64) -> Result<Self> {
        match self {
            Domain::Interval { a, b } => Domain::interval(r * a, r * b),
            Domain::Star2d { center, cos, sin } => Domain::star(
                [r * center[0], r * center[1]],
                cos.iter().map(|c| r * c).collect(),
                sin.iter().map(|c| r * c).collect(),
            ),
        }
    }
}

/// Surface quadrature of `∂Ω` with outward normals.
#[derive(Debug, Clone)]
pub struct BoundaryQuadrature {
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
    pub normals: Vec<Point>,
    /// Polar angle of each node about the domain center.
    pub angles: Vec<f64>,
}

impl BoundaryQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(usize) -> f64) -> f64 {
        (0..self.len()).map(|i| self.weights[i] * f(i)).sum()
    }
}

/// `dist(x, ℝⁿ∖Ω)`: zero outside and on the boundary.
pub fn boundary_distance(d: &Domain, x: Point) -> f64 {
    match d {
        Domain::Interval { a, b } => (x[0] - a).min(b - x[0]).max(0.0),
        Domain::Star2d { .. } => {
            if !d.contains(x) {
                return 0.0;
            }
            if let Some((c, r)) = d.as_ball() {
                return (r - (x[0] - c[0]).hypot(x[1] - c[1])).max(0.0);
            }
            nearest_boundary_distance(d, x)
        }
    }
}

/// Coarse sampling followed by golden-section refinement of `|p(θ) - x|²`.
fn nearest_boundary_distance(d: &Domain, x: Point) -> f64 {
    let dist2 = |th: f64| {
        let p = d.boundary_point(th);
        (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2)
    };
    let m = 720;
    let step = TAU / m as f64;
    let samples: Vec<f64> = (0..m).map(|k| dist2(step * k as f64)).collect();
    let mut best = f64::INFINITY;
    for k in 0..m {
        let prev = samples[(k + m - 1) % m];
        let next = samples[(k + 1) % m];
        if samples[k] <= prev && samples[k] <= next {
            let (mut lo, mut hi) = (step * (k as f64 - 1.0), step * (k as f64 + 1.0));
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let mut c1 = hi - g * (hi - lo);
            let mut c2 = lo + g * (hi - lo);
            let (mut f1, mut f2) = (dist2(c1), dist2(c2));
            for _ in 0..80 {
                if f1 < f2 {
                    hi = c2;
                    c2 = c1;
                    f2 = f1;
                    c1 = hi - g * (hi - lo);
                    f1 = dist2(c1);
                } else {
                    lo = c1;
                    c1 = c2;
                    f1 = f2;
                    c2 = lo + g * (hi - lo);
                    f2 = dist2(c2);
                }
            }
            best = best.min(f1.min(f2)).min(samples[k]);
        }
    }
    best.sqrt()
}

/// `Ω_ψ = (I + ψ)Ω`, refit to the same representation. Star domains are refit by least
/// squares on 512 pushed-forward boundary samples.
pub fn apply_perturbation(d: &Domain, psi: &PerturbationField) -> Result<Domain> {
    if psi.is_zero() {
        return Ok(d.clone());
    }
    let bound = psi.c1_norm_bound(d);
    if bound >= 1.0 {
        return Err(Error::TooLarge(bound));
    }
    match d {
        Domain::Interval { a, b } => {
            let na = a + psi.value([*a, 0.0])[0];
            let nb = b + psi.value([*b, 0.0])[0];
            Domain::interval(na, nb)
        }
        Domain::Star2d { center, cos, sin } => {
            let mut angles = Vec::with_capacity(REFIT_SAMPLES);
            let mut radii = Vec::with_capacity(REFIT_SAMPLES);
            let mut unwrapped_prev: Option<f64> = None;
            for k in 0..REFIT_SAMPLES {
                let th = TAU * k as f64 / REFIT_SAMPLES as f64;
                let p = d.boundary_point(th);
                let v = psi.value(p);
                let q = [p[0] + v[0] - center[0], p[1] + v[1] - center[1]];
                let mut phi = q[1].atan2(q[0]);
                if let Some(prev) = unwrapped_prev {
                    while phi < prev - std::f64::consts::PI {
                        phi += TAU;
                    }
                    while phi > prev + std::f64::consts::PI {
                        phi -= TAU;
                    }
                    if phi <= prev {
                        return Err(Error::NotStarShaped);
                    }
                } else {
                    while phi < th - std::f64::consts::PI {
                        phi += TAU;
                    }
                    while phi > th + std::f64::consts::PI {
                        phi -= TAU;
                    }
                }
                unwrapped_prev = Some(phi);
                angles.push(phi);
                radii.push(q[0].hypot(q[1]));
            }
            let winding = angles[REFIT_SAMPLES - 1] - angles[0];
            if winding >= TAU || winding <= 0.0 {
                return Err(Error::NotStarShaped);
            }
            let harmonics = REFIT_HARMONICS.max(cos.len()).max(sin.len() + 1);
            let (c, s) = fit_fourier(&angles, &radii, harmonics);
            Domain::star(*center, c, s)
        }
    }
}

/// Least-squares trigonometric fit `r(θ) ≈ c_0 + Σ c_k cos kθ + s_k sin kθ`, trailing
/// coefficients below 1e-15 trimmed.
fn fit_fourier(angles: &[f64], values: &[f64], harmonics: usize) -> (Vec<f64>, Vec<f64>) {
    let cols = 2 * harmonics + 1;
    let mut a = DMatrix::zeros(angles.len(), cols);
    for (i, &th) in angles.iter().enumerate() {
        a[(i, 0)] = 1.0;
        for k in 1..=harmonics {
            let (sn, cs) = (k as f64 * th).sin_cos();
            a[(i, 2 * k - 1)] = cs;
            a[(i, 2 * k)] = sn;
        }
    }
    let b = DVector::from_column_slice(values);
    let x = a.svd(true, true).solve(&b, 1e-14).expect("SVD solve");
    let mut cos: Vec<f64> = (0..=harmonics).map(|k| if k == 0 { x[0] } else { x[2 * k - 1] }).collect();
    let mut sin: Vec<f64> = (1..=harmonics).map(|k| x[2 * k]).collect();
    for v in cos.iter_mut().chain(sin.iter_mut()) {
        if v.abs() < 1e-15 {
            *v = 0.0;
        }
    }
    while cos.len() > 1 && *cos.last().unwrap() == 0.0 {
        cos.pop();
    }
    while sin.last() == Some(&0.0) {
        sin.pop();
    }
    (cos, sin)
}

/// `det(I + Dψ(x))`; in one dimension `1 + ψ'(x)`.
pub fn jacobian_determinant(psi: &PerturbationField, x: Point, dim: usize) -> f64 {
    let j = psi.jacobian(x);
    if dim == 1 {
        1.0 + j[0][0]
    } else {
        (1.0 + j[0][0]) * (1.0 + j[1][1]) - j[0][1] * j[1][0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances() {
        let i = Domain::interval(-1.0, 1.0).unwrap();
        assert_eq!(boundary_distance(&i, [0.0, 0.0]), 1.0);
        assert_eq!(boundary_distance(&i, [2.0, 0.0]), 0.0);
        let disk = Domain::disk([0.0, 0.0], 1.0).unwrap();
        assert!((boundary_distance(&disk, [0.5, 0.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn star_distance_matches_dense_sampling() {
        let d = Domain::star([0.0, 0.0], vec![1.0, 0.0, 0.0, 0.2], vec![]).unwrap();
        for x in [[0.0, 0.0], [0.3, 0.1], [-0.5, 0.4], [0.9, 0.0]] {
            let brute = (0..10_000)
                .map(|k| {
                    let p = d.boundary_point(TAU * k as f64 / 1e4);
                    (p[0] - x[0]).hypot(p[1] - x[1])
                })
                .fold(f64::INFINITY, f64::min);
            let v = boundary_distance(&d, x);
            assert!((v - brute).abs() < 1e-6, "{x:?}: {v} vs {brute}");
        }
    }

    #[test]
    fn disk_quadrature_integrates_trig_polynomials() {
        let d = Domain::disk([0.0, 0.0], 1.0).unwrap();
        let q = d.boundary_quadrature(256);
        assert!((q.weights.iter().sum::<f64>() - TAU).abs() < 1e-12);
        for k in 1..=8 {
            let v = q.integrate(|i| (k as f64 * q.angles[i]).cos());
            assert!(v.abs() < 1e-10);
        }
        for n in &q.normals {
            assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_domains() {
        assert!(Domain::interval(1.0, 0.0).is_err());
        assert!(Domain::star([0.0, 0.0], vec![0.5, 0.6], vec![]).is_err());
    }
}
