//! Boundary densities `u/δ^s`, Hadamard derivatives, splitting matrices and the
//! Pohozaev identity.
//!
//! Conventions: every [`SplittingMatrix`] is symmetric and its eigenvalues are the
//! first-order derivatives `λ'(0)` of the eigenvalue branches leaving the cluster. For a
//! domain perturbation `Ω_t = (I + tψ)Ω`,
//!
//! ```text
//! M_ij = -Γ(1+s)² ∮ (φ_i/δ^s)(φ_j/δ^s) ψ·N dσ                 (boundary route)
//!      = ⟨(Ȧ - λ₀ Ṁ) φ_i, φ_j⟩                               (volumetric route)
//! ```
//!
//! where `Ȧ`, `Ṁ` are the `t`-derivatives of the pulled-back form and mass. For a potential
//! `a + t b`, `M_ij = ∫ b φ_i φ_j`; for a weight `α + t β`, `M_ij = -λ₀ ∫ β φ_i φ_j`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::discretization::{derivative_along, Basis, DiscreteOperator, Grid, ScalarField, SpectralInfo};
use crate::geometry::{BoundaryQuadrature, CompositeMap, FieldKind, PerturbationField, Point};
use crate::quadrature::{gauss_jacobi, TanhSinh};
use crate::special::{ball_trace_constant, boundary_constant, fractional_constant};
use crate::spectrum::{solve, track_spectra, Cluster, Spectrum};
use crate::{Error, Result};

/// Fourier modes kept in the ball representation of the density on a disk.
const BALL_MODES: i32 = 14;
/// Distances (in units of `h`) of the samples of the normal-ray fit.
const RAY_SAMPLES: [f64; 4] = [1.5, 2.5, 3.5, 4.5];
/// Largest accepted residual of the ray fit, relative to the largest fitted density.
const RAY_TOLERANCE: f64 = 0.2;

/// How a [`BoundaryDensity`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMethod {
    /// Representation formula on the reference interval (weighted spectral basis).
    IntervalGreen,
    /// Representation formula on a ball, evaluated with the lattice values.
    BallRepresentation,
    /// Least-squares fit of `c τ^s` along inward normal rays.
    NormalRay,
}

/// Values of `u/δ^s` at the nodes of a boundary quadrature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDensity {
    pub values: Vec<f64>,
    /// Per-node fit residuals (normal-ray fits only).
    pub residuals: Vec<f64>,
    pub method: DensityMethod,
}

impl BoundaryDensity {
    /// `Γ(1+s)² ∮ d² f dσ` for a boundary weight `f`.
    pub fn weighted_square(&self, s: f64, bq: &BoundaryQuadrature, f: impl Fn(usize) -> f64) -> f64 {
        boundary_constant(s) * bq.integrate(|k| self.values[k] * self.values[k] * f(k))
    }
}

/// `φᵀAφ / φᵀMφ`.
pub fn rayleigh_quotient(phi: &DVector<f64>, op: &DiscreteOperator) -> f64 {
    let a = (phi.transpose() * &op.stiffness * phi)[(0, 0)];
    let m = (phi.transpose() * &op.mass * phi)[(0, 0)];
    a / m
}

/// Extracts `u/δ^s` on `bq` for a discrete eigenfunction `phi` of `op`.
///
/// - weighted spectral basis: `(u/δ^s)(±1)` from the one-dimensional representation
///   formula `κ ∫ f(y) (1 - y²)^s / |1 ∓ y| dy` with `f = (λα - a) u`, integrated by
///   Gauss-Jacobi quadrature matched to the endpoint behavior;
/// - undeformed lattice on an interval or a disk: the same representation formula on the
///   ball, summed over the nodes (on the disk, through its Fourier expansion in the
///   boundary angle);
/// - any other lattice: a fit of `c τ^s` to bilinear samples along inward normals.
pub fn boundary_density(
    phi: &DVector<f64>,
    op: &DiscreteOperator,
    bq: &BoundaryQuadrature,
) -> Result<BoundaryDensity> {
    let lambda = rayleigh_quotient(phi, op);
    match &op.basis {
        Basis::Spectral1d(info) => {
            let values = bq.nodes.iter().map(|x| interval_green(info, op, phi, lambda, x[0])).collect();
            Ok(BoundaryDensity { values, residuals: vec![0.0; bq.len()], method: DensityMethod::IntervalGreen })
        }
        Basis::Grid { grid, map } => {
            let f = op.source_factor_nodal(lambda)?;
            let src: Vec<f64> = f.iter().zip(phi.iter()).map(|(a, b)| a * b).collect();
            if map.is_identity() {
                if let Some((c, r)) = grid.domain.as_ball() {
                    let values = if grid.dim == 1 {
                        bq.nodes.iter().map(|x| ball_pointwise(grid, &src, c, r, *x)).collect()
                    } else {
                        disk_fourier(grid, &src, c, r, &bq.angles)
                    };
                    return Ok(BoundaryDensity {
                        values,
                        residuals: vec![0.0; bq.len()],
                        method: DensityMethod::BallRepresentation,
                    });
                }
            }
            if grid.dim == 1 {
                return Err(Error::Unsupported("boundary density on a deformed 1-D lattice".into()));
            }
            normal_ray_fit(grid, map, phi, bq)
        }
    }
}

fn interval_green(info: &SpectralInfo, op: &DiscreteOperator, phi: &DVector<f64>, lambda: f64, x: f64) -> f64 {
    let s = info.s;
    let l = info.half_length();
    let right = x > info.midpoint();
    // (1 - y)^{2s-1} (1 + y)^{2s} at the right end, mirrored at the left
    let (alpha, beta) = if right { (2.0 * s - 1.0, 2.0 * s) } else { (2.0 * s, 2.0 * s - 1.0) };
    let rule = gauss_jacobi(info.n + 8, alpha, beta);
    let coeffs: Vec<f64> = phi.iter().copied().collect();
    let mut acc = 0.0;
    for (&y, &w) in rule.nodes.iter().zip(&rule.weights) {
        let xp = info.midpoint() + l * y;
        let g = op.source_factor(lambda, [xp, 0.0]).unwrap_or(lambda);
        acc += w * g * info.polynomial_part(&coeffs, y);
    }
    // reference eigenvalue scale ℓ^{2s} and density scale ℓ^{-s}
    let kappa = ball_trace_constant(1, s, 1.0);
    kappa * acc * l.powf(2.0 * s) * l.powf(-s)
}

fn ball_pointwise(grid: &Grid, src: &[f64], c: Point, r: f64, z: Point) -> f64 {
    let s = grid.s;
    let hn = grid.h.powi(grid.dim as i32);
    let kappa = ball_trace_constant(grid.dim, s, r);
    let p = grid.dim as f64;
    let mut acc = 0.0;
    for (x, f) in grid.nodes.iter().zip(src) {
        let r2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
        let d = ((z[0] - x[0]).powi(2) + (z[1] - x[1]).powi(2)).sqrt();
        acc += f * (r * r - r2).powf(s) * d.powf(-p);
    }
    kappa * hn * acc
}

/// On a disk of radius `R`, `(R² - ρ²)/|z - y|² = Σ_m (ρ/R)^{|m|} e^{im(θ - α)}` for
/// `z = R e^{iθ}`, `y = ρ e^{iα}`; the representation formula becomes a Fourier series in
/// `θ` whose coefficients are node sums.
fn disk_fourier(grid: &Grid, src: &[f64], c: Point, r: f64, angles: &[f64]) -> Vec<f64> {
    let s = grid.s;
    let kappa = ball_trace_constant(2, s, r) * grid.h * grid.h;
    let modes = BALL_MODES as usize;
    let mut re = vec![0.0; modes + 1];
    let mut im = vec![0.0; modes + 1];
    for (x, f) in grid.nodes.iter().zip(src) {
        let (dx, dy) = (x[0] - c[0], x[1] - c[1]);
        let rho = dx.hypot(dy);
        let al = dy.atan2(dx);
        let base = f * (r * r - rho * rho).powf(s - 1.0);
        let q = rho / r;
        let mut pw = 1.0;
        for m in 0..=modes {
            let (sn, cs) = (m as f64 * al).sin_cos();
            re[m] += base * pw * cs;
            im[m] -= base * pw * sn;
            pw *= q;
        }
    }
    angles
        .iter()
        .map(|&th| {
            let mut v = re[0];
            for m in 1..=modes {
                let (sn, cs) = (m as f64 * th).sin_cos();
                v += 2.0 * (re[m] * cs - im[m] * sn);
            }
            kappa * v
        })
        .collect()
}

fn invert_map(map: &CompositeMap, y: Point) -> Point {
    let mut x = y;
    for _ in 0..30 {
        let (fx, g) = map.apply_with_jacobian(x);
        let r = [fx[0] - y[0], fx[1] - y[1]];
        if r[0].hypot(r[1]) < 1e-14 {
            break;
        }
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        x[0] -= (g[1][1] * r[0] - g[0][1] * r[1]) / det;
        x[1] -= (-g[1][0] * r[0] + g[0][0] * r[1]) / det;
    }
    x
}

fn bilinear(grid: &Grid, phi: &DVector<f64>, x: Point) -> f64 {
    let u = (x[0] - grid.origin[0]) / grid.h;
    let v = (x[1] - grid.origin[1]) / grid.h;
    let (i, j) = (u.floor(), v.floor());
    let (fu, fv) = (u - i, v - j);
    let (i, j) = (i as i64, j as i64);
    let val = |a: i64, b: i64| grid.node_at([a, b]).map_or(0.0, |k| phi[k]);
    (1.0 - fu) * (1.0 - fv) * val(i, j)
        + fu * (1.0 - fv) * val(i + 1, j)
        + (1.0 - fu) * fv * val(i, j + 1)
        + fu * fv * val(i + 1, j + 1)
}

fn normal_ray_fit(
    grid: &Grid,
    map: &CompositeMap,
    phi: &DVector<f64>,
    bq: &BoundaryQuadrature,
) -> Result<BoundaryDensity> {
    let s = grid.s;
    let fits: Vec<(f64, f64)> = bq
        .nodes
        .par_iter()
        .zip(&bq.normals)
        .map(|(p, n)| {
            let taus: Vec<f64> = RAY_SAMPLES.iter().map(|t| t * grid.h).collect();
            let samples: Vec<f64> = taus
                .iter()
                .map(|&t| bilinear(grid, phi, invert_map(map, [p[0] - t * n[0], p[1] - t * n[1]])))
                .collect();
            let basis: Vec<f64> = taus.iter().map(|t| t.powf(s)).collect();
            let c = samples.iter().zip(&basis).map(|(a, b)| a * b).sum::<f64>()
                / basis.iter().map(|b| b * b).sum::<f64>();
            let res = samples.iter().zip(&basis).map(|(a, b)| (a - c * b).powi(2)).sum::<f64>().sqrt()
                / basis.iter().map(|b| b * b).sum::<f64>().sqrt();
            (c, res)
        })
        .collect();
    let scale = fits.iter().fold(0.0, |m: f64, f| m.max(f.0.abs()));
    if let Some((node, f)) = fits.iter().enumerate().find(|(_, f)| f.1 > RAY_TOLERANCE * scale) {
        return Err(Error::FitUnstable { node, residual: f.1 / scale.max(f64::MIN_POSITIVE) });
    }
    Ok(BoundaryDensity {
        values: fits.iter().map(|f| f.0).collect(),
        residuals: fits.iter().map(|f| f.1 / scale.max(f64::MIN_POSITIVE)).collect(),
        method: DensityMethod::NormalRay,
    })
}

fn boundary_origin(op: &DiscreteOperator) -> Point {
    match &op.basis {
        Basis::Spectral1d(info) => [info.midpoint(), 0.0],
        Basis::Grid { grid, map } => map.apply(grid.domain.center()),
    }
}

/// Relative residual of `Γ(1+s)² ∮ (φ_k/δ^s)² (x - c)·N dσ = 2s λ_k ∫ φ_k²`, with `c` the
/// center of the domain.
pub fn pohozaev_residual(spec: &Spectrum, k: usize, bq: &BoundaryQuadrature) -> Result<f64> {
    if k >= spec.len() {
        return Err(Error::InvalidArgument(format!("eigenvalue index {k} beyond the {} computed", spec.len())));
    }
    let op = &spec.operator;
    let phi = spec.vector(k);
    let d = boundary_density(&phi, op, bq)?;
    let c = boundary_origin(op);
    let s = op.order();
    let lhs = d.weighted_square(s, bq, |j| {
        let (x, n) = (bq.nodes[j], bq.normals[j]);
        (x[0] - c[0]) * n[0] + (x[1] - c[1]) * n[1]
    });
    let norm = (phi.transpose() * op.l2_mass() * &phi)[(0, 0)];
    let rhs = 2.0 * s * spec.eigenvalues[k] * norm;
    Ok((lhs - rhs).abs() / rhs.abs())
}

/// Perturbation whose first-order effect a [`SplittingMatrix`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplittingMode {
    Domain,
    Potential,
    Weight,
}

/// Cluster matrix of first-order eigenvalue derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct SplittingMatrix {
    pub mode: SplittingMode,
    pub matrix: DMatrix<f64>,
    pub cluster: Cluster,
    /// Ascending eigenvalues of `matrix`: the predicted slopes.
    pub eigenvalues: Vec<f64>,
    /// `‖M - (tr M / ν) I‖_F`.
    pub deviation: f64,
}

impl SplittingMatrix {
    pub fn new(mode: SplittingMode, matrix: DMatrix<f64>, cluster: Cluster) -> Self {
        let matrix = 0.5 * (&matrix + matrix.transpose());
        let nu = matrix.nrows();
        let mean = matrix.trace() / nu as f64;
        let deviation = (&matrix - DMatrix::identity(nu, nu) * mean).norm();
        let mut eigenvalues: Vec<f64> = SymmetricEigen::new(matrix.clone()).eigenvalues.iter().copied().collect();
        eigenvalues.sort_by(f64::total_cmp);
        SplittingMatrix { mode, matrix, cluster, eigenvalues, deviation }
    }

    /// Largest minus smallest eigenvalue.
    pub fn spread(&self) -> f64 {
        self.eigenvalues.last().unwrap() - self.eigenvalues[0]
    }

    /// JSON report with sorted keys.
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<Vec<f64>> =
            (0..self.matrix.nrows()).map(|i| self.matrix.row(i).iter().copied().collect()).collect();
        json!({
            "mode": self.mode,
            "cluster": self.cluster,
            "matrix": rows,
            "eigenvalues": self.eigenvalues,
            "deviation": self.deviation,
            "normalization": "l2",
        })
    }
}

fn cluster_vectors(cluster: &Cluster, spec: &Spectrum) -> Result<DMatrix<f64>> {
    if cluster.end >= spec.len() {
        return Err(Error::InvalidArgument("cluster beyond the computed spectrum".into()));
    }
    Ok(spec.eigenvectors.columns(cluster.start, cluster.len()).into_owned())
}

/// Boundary route for `Ω_t = (I + tψ)Ω`.
pub fn splitting_matrix_domain(
    cluster: &Cluster,
    spec: &Spectrum,
    psi: &PerturbationField,
    bq: &BoundaryQuadrature,
) -> Result<SplittingMatrix> {
    let op = &spec.operator;
    let s = op.order();
    let phis = cluster_vectors(cluster, spec)?;
    let dens: Vec<BoundaryDensity> = phis
        .column_iter()
        .map(|c| boundary_density(&c.into_owned(), op, bq))
        .collect::<Result<_>>()?;
    let psin: Vec<f64> = bq
        .nodes
        .iter()
        .zip(&bq.normals)
        .map(|(x, n)| {
            let v = psi.value(*x);
            v[0] * n[0] + v[1] * n[1]
        })
        .collect();
    let nu = cluster.len();
    let g = boundary_constant(s);
    let m = DMatrix::from_fn(nu, nu, |i, j| {
        -g * bq.integrate(|k| dens[i].values[k] * dens[j].values[k] * psin[k])
    });
    Ok(SplittingMatrix::new(SplittingMode::Domain, m, cluster.clone()))
}

/// `M_ij = ∫ b φ_i φ_j`: slopes under `a → a + t b`.
pub fn splitting_matrix_potential(cluster: &Cluster, spec: &Spectrum, b: &ScalarField) -> Result<SplittingMatrix> {
    let phis = cluster_vectors(cluster, spec)?;
    let p = b.pairing_matrix(&spec.operator)?;
    let m = phis.transpose() * p * &phis;
    Ok(SplittingMatrix::new(SplittingMode::Potential, m, cluster.clone()))
}

/// `M_ij = -λ₀ ∫ β φ_i φ_j`: slopes under `α → α + t β`.
pub fn splitting_matrix_weight(cluster: &Cluster, spec: &Spectrum, beta: &ScalarField) -> Result<SplittingMatrix> {
    let phis = cluster_vectors(cluster, spec)?;
    let p = beta.pairing_matrix(&spec.operator)?;
    let lambda = cluster_mean(cluster, spec);
    let m = phis.transpose() * p * &phis * (-lambda);
    Ok(SplittingMatrix::new(SplittingMode::Weight, m, cluster.clone()))
}

fn cluster_mean(cluster: &Cluster, spec: &Spectrum) -> f64 {
    spec.eigenvalues[cluster.indices()].iter().sum::<f64>() / cluster.len() as f64
}

/// Volumetric route: `⟨(Ȧ - λ₀ Ṁ) φ_i, φ_j⟩` from the derivative of the pulled-back pencil
/// (lattices), or from the derivative kernel integrated directly (weighted spectral basis).
pub fn derivative_via_transformed_form(
    cluster: &Cluster,
    spec: &Spectrum,
    psi: &PerturbationField,
) -> Result<SplittingMatrix> {
    let op = &spec.operator;
    if op.potential.is_some() || op.weight.is_some() {
        return Err(Error::Unsupported("volumetric route for potential or weighted problems".into()));
    }
    let phis = cluster_vectors(cluster, spec)?;
    let lambda = cluster_mean(cluster, spec);
    let m = match &op.basis {
        Basis::Grid { .. } => {
            let (ka, km) = derivative_along(op, psi)?;
            phis.transpose() * (ka - km * lambda) * &phis
        }
        Basis::Spectral1d(info) => spectral_volumetric(info, &phis, lambda, psi),
    };
    Ok(SplittingMatrix::new(SplittingMode::Domain, m, cluster.clone()))
}

/// Derivative-kernel factor `ψ'(x) + ψ'(y) - p (ψ(x) - ψ(y))/(x - y)` for a field along
/// the line, in reference coordinates.
struct LineField<'a> {
    psi: &'a PerturbationField,
    mid: f64,
    half: f64,
}

impl LineField<'_> {
    fn at(&self, y: f64) -> (f64, f64) {
        let (v, g) = self.psi.value_and_jacobian([self.mid + self.half * y, 0.0]);
        (v[0] / self.half, g[0][0])
    }

    /// `ψ'(x) + ψ'(y) - p (ψ(x) - ψ(y))/(x - y)`, with the far field of compactly
    /// supported fields taken as zero.
    fn factor(&self, x: f64, r: f64, p: f64) -> f64 {
        let (fx, dx) = self.at(x);
        if let FieldKind::Affine { a, .. } = &self.psi.kind {
            let slope = self.psi.amplitude * a[0][0];
            return (2.0 - p) * slope;
        }
        if r.abs() > 1e6 {
            return dx;
        }
        if r.abs() < 1e-9 {
            return (2.0 - p) * dx;
        }
        let (fy, dy) = self.at(x + r);
        dx + dy - p * (fy - fx) / r
    }
}

fn spectral_volumetric(info: &SpectralInfo, phis: &DMatrix<f64>, lambda: f64, psi: &PerturbationField) -> DMatrix<f64> {
    let s = info.s;
    let p = 1.0 + 2.0 * s;
    let l = info.half_length();
    let nu = phis.ncols();
    let field = LineField { psi, mid: info.midpoint(), half: l };
    let coeffs: Vec<Vec<f64>> = phis.column_iter().map(|c| c.iter().copied().collect()).collect();
    let values = |y: f64, a: f64, b: f64| -> Vec<f64> {
        coeffs.iter().map(|c| info.eval_ref(c, y, a, b)).collect()
    };
    let ts = TanhSinh::new(1.0 / 24.0, 3.2);
    let mut form = DMatrix::zeros(nu, nu);
    let mut exterior = DMatrix::zeros(nu, nu);
    let mut mass = DMatrix::zeros(nu, nu);
    // interior pairs x < y: outer over x, inner over y ∈ (x, 1)
    for &(x, xa, xb, wx) in &ts.points {
        let ux = values(x, xa, xb);
        let (_, dx) = field.at(x);
        let inner = |z: f64, za: f64, zb: f64| -> (Vec<f64>, f64) {
            // z ∈ (x, 1): distances to -1 and 1 from the inner rule
            let uz = values(z, xa + za, zb);
            (uz, field.factor(x, za, p) * za.powf(-p))
        };
        let mut acc = DMatrix::zeros(nu, nu);
        let half = 0.5 * xb;
        for &(t, ta, tb, wt) in &ts.points {
            // map t ∈ (-1, 1) to z = x + half (1 + t)
            let z = x + half * (1.0 + t);
            let za = half * ta;
            let zb = half * tb;
            let (uz, k) = inner(z, za, zb);
            let w = wt * half * k;
            for i in 0..nu {
                let di = ux[i] - uz[i];
                for j in 0..=i {
                    acc[(i, j)] += w * di * (ux[j] - uz[j]);
                }
            }
        }
        form += acc * wx;
        // exterior: T(x) = ∫_{|y| > 1} m |x - y|^{-p} dy with u = |y - x|^{-2s}
        let tx = exterior_tail(&field, x, xa, xb, s, &ts);
        for i in 0..nu {
            for j in 0..=i {
                exterior[(i, j)] += wx * ux[i] * ux[j] * tx;
                mass[(i, j)] += wx * ux[i] * ux[j] * dx;
            }
        }
    }
    for i in 0..nu {
        for j in 0..i {
            form[(j, i)] = form[(i, j)];
            exterior[(j, i)] = exterior[(i, j)];
            mass[(j, i)] = mass[(i, j)];
        }
    }
    let c = fractional_constant(1, s);
    // physical coefficients: the reference form scales by ℓ^{1-2s}, the mass by ℓ
    (form + exterior) * (c * l.powf(1.0 - 2.0 * s)) - mass * (lambda * l)
}

fn exterior_tail(field: &LineField, x: f64, xa: f64, xb: f64, s: f64, ts: &TanhSinh) -> f64 {
    let p = 1.0 + 2.0 * s;
    let mut total = 0.0;
    for (dist, sign) in [(xb, 1.0), (xa, -1.0)] {
        let umax = dist.powf(-2.0 * s);
        let part = ts.integrate(0.0, umax, |u, _, _| {
            let r = u.powf(-1.0 / (2.0 * s));
            field.factor(x, sign * r, p)
        });
        total += part / (2.0 * s);
    }
    total
}

/// Eigenvalue slopes at `t = 0` from a one-parameter family of pencils, by overlap
/// tracking over `t ∈ {-2τ, -τ, τ, 2τ}` and the Richardson combination of the two
/// central differences. Returns the ascending slopes of the paths through `cluster`.
pub fn tracked_slopes(
    family: &(dyn Fn(f64) -> Result<DiscreteOperator> + Sync),
    cluster: &Cluster,
    tau: f64,
) -> Result<Vec<f64>> {
    let ts = [-2.0 * tau, -tau, tau, 2.0 * tau];
    let k = cluster.end + 3;
    let spectra: Vec<Spectrum> = ts
        .par_iter()
        .map(|&t| {
            let op = family(t)?;
            solve(&op, k.min(op.size()))
        })
        .collect::<Result<_>>()?;
    let tracks = track_spectra(&spectra, cluster.end + 1)?;
    let mut slopes: Vec<f64> = cluster
        .indices()
        .map(|p| {
            let v = &tracks.paths[p];
            let d1 = (v[2] - v[1]) / (2.0 * tau);
            let d2 = (v[3] - v[0]) / (4.0 * tau);
            (4.0 * d1 - d2) / 3.0
        })
        .collect();
    slopes.sort_by(f64::total_cmp);
    Ok(slopes)
}
