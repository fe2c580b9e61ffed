//! Vertex lattices with hat-function interpolation.
//!
//! For an interior node `x_i` the operator row is
//! `Σ_q ŵ(q - i) ρ_iq (u_i - u_q) + near field + tail · u_i`, where
//! - `ŵ(k)` integrates the hat function centered at offset `k` against `|z|^{-n-2s}`
//!   outside the near square `|z|_∞ < h`;
//! - `ρ_iq = (|x_i - x_q| / |𝓕x_i - 𝓕x_q|)^{n+2s} J_i J_q` is the pull-back factor (one for
//!   the undeformed lattice);
//! - the near field is the second-order Taylor correction `-½ Σ I_kl ∂_k∂_l u` with the
//!   anisotropic moments `I_kl = J² ∫_Q z_k z_l |D𝓕 z|^{-n-2s} dz`;
//! - `q` runs over a window of lattice points around the domain (values outside `Ω` are
//!   zero) and the tail is the exact integral of the kernel over the image of the
//!   window's complement, written as a boundary integral via the divergence theorem.
//!
//! Rows are symmetrized; stiffness is `C_{n,s} hⁿ L` and mass is `hⁿ diag(J_i)`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{Basis, DiscreteOperator};
use crate::geometry::{boundary_distance, CompositeMap, Domain, FieldKind, PerturbationField, Point};
use crate::quadrature::gauss_legendre;
use crate::special::{check_order, fractional_constant};
use crate::{Error, Result};

/// Default cap on interior nodes of a planar lattice.
pub const DEFAULT_NODE_CAP: usize = 4000;
/// Offsets with `|k|_∞ ≤ NEAR_TABLE` use quadrature hat weights; farther ones use the
/// midpoint value with its Laplacian correction.
const NEAR_TABLE: i64 = 10;
/// Window half-width as a multiple of the domain radius (planar lattices).
const WINDOW_FACTOR: f64 = 1.5;
const MIN_NODES: usize = 8;

/// A lattice of spacing `h` and its interior nodes.
#[derive(Debug)]
pub struct Grid {
    pub s: f64,
    pub h: f64,
    pub dim: usize,
    pub domain: Domain,
    /// Lattice point `k` sits at `origin + h k`.
    pub origin: Point,
    pub nodes: Vec<Point>,
    pub index: Vec<[i64; 2]>,
    lo: [i64; 2],
    hi: [i64; 2],
    node_of: Vec<i64>,
    hat: HatWeights,
    /// Angular rule for the near-field moments: direction and weight `r_Q^{2-2s}/(2-2s) dθ`.
    angular: Vec<(Point, f64)>,
    /// Boundary of the window: point, unit tangent, arc-length weight.
    edge: Vec<(Point, Point, f64)>,
}

#[derive(Debug)]
enum HatWeights {
    Line(Vec<f64>),
    Plane(Vec<f64>),
}

impl Grid {
    fn window_len(&self) -> [usize; 2] {
        [(self.hi[0] - self.lo[0] + 1) as usize, (self.hi[1] - self.lo[1] + 1) as usize]
    }

    fn window_points(&self) -> Vec<[i64; 2]> {
        let mut v = Vec::new();
        for i in self.lo[0]..=self.hi[0] {
            for j in self.lo[1]..=self.hi[1] {
                v.push([i, j]);
            }
        }
        v
    }

    fn window_slot(&self, k: [i64; 2]) -> Option<usize> {
        if k[0] < self.lo[0] || k[0] > self.hi[0] || k[1] < self.lo[1] || k[1] > self.hi[1] {
            return None;
        }
        let len = self.window_len();
        Some((k[0] - self.lo[0]) as usize * len[1] + (k[1] - self.lo[1]) as usize)
    }

    /// Interior node with lattice index `k`, if any.
    pub fn node_at(&self, k: [i64; 2]) -> Option<usize> {
        let slot = self.window_slot(k)?;
        let v = self.node_of[slot];
        (v >= 0).then_some(v as usize)
    }

    pub fn position(&self, k: [i64; 2]) -> Point {
        [self.origin[0] + self.h * k[0] as f64, self.origin[1] + self.h * k[1] as f64]
    }

    /// Half-width of the window box (planar) or its end points (line).
    fn window_extent(&self) -> (Point, Point) {
        let a = self.position(self.lo);
        let b = self.position(self.hi);
        let pad = 0.5 * self.h;
        if self.dim == 1 {
            ([a[0] - pad, 0.0], [b[0] + pad, 0.0])
        } else {
            ([a[0] - pad, a[1] - pad], [b[0] + pad, b[1] + pad])
        }
    }

    /// Unscaled hat weight `ŵ(k)` for `h = 1`.
    fn hat_weight(&self, k: [i64; 2]) -> f64 {
        match &self.hat {
            HatWeights::Line(w) => w[k[0].unsigned_abs() as usize],
            HatWeights::Plane(t) => {
                let (a, b) = (k[0].abs(), k[1].abs());
                if a <= NEAR_TABLE && b <= NEAR_TABLE {
                    t[(a * (NEAR_TABLE + 1) + b) as usize]
                } else {
                    let p = 2.0 + 2.0 * self.s;
                    let r2 = (a * a + b * b) as f64;
                    r2.powf(-0.5 * p) * (1.0 + p * p / (12.0 * r2))
                }
            }
        }
    }

    /// Checks that a compactly supported field vanishes near the window boundary, where
    /// the tail integral assumes the deformation is known.
    fn check_support(&self, f: &PerturbationField) -> Result<()> {
        let (lo, hi) = self.window_extent();
        let (c, r) = match &f.kind {
            FieldKind::Affine { .. } => return Ok(()),
            FieldKind::Bump1d { center, radius, .. } => ([*center, 0.0], *radius),
            FieldKind::NormalFourier { domain, width, .. } => {
                (domain.center(), (1.0 + width) * domain.max_radius())
            }
        };
        let fits = (0..self.dim).all(|k| c[k] - r > lo[k] + self.h && c[k] + r < hi[k] - self.h);
        if fits || f.is_zero() {
            Ok(())
        } else {
            Err(Error::Unsupported(format!(
                "field support reaches the lattice window boundary ({:?} .. {:?})",
                lo, hi
            )))
        }
    }
}

fn line_hat_weights(s: f64, max_k: usize) -> Vec<f64> {
    let e = 1.0 - 2.0 * s;
    let i0 = |a: f64, b: f64| (a.powf(-2.0 * s) - b.powf(-2.0 * s)) / (2.0 * s);
    let i1 = |a: f64, b: f64| {
        let l = (b / a).ln();
        if e == 0.0 {
            l
        } else {
            a.powf(e) * (e * l).exp_m1() / e
        }
    };
    let mut w = vec![0.0; max_k + 2];
    for (k, wk) in w.iter_mut().enumerate().skip(1) {
        let kf = k as f64;
        let mut tot = 0.0;
        if k >= 2 {
            tot += i1(kf - 1.0, kf) - (kf - 1.0) * i0(kf - 1.0, kf);
        }
        tot += (kf + 1.0) * i0(kf, kf + 1.0) - i1(kf, kf + 1.0);
        *wk = tot;
    }
    w
}

fn plane_hat_weights(s: f64) -> Vec<f64> {
    let p = 2.0 + 2.0 * s;
    let gl = gauss_legendre(16);
    let n = (NEAR_TABLE + 1) as usize;
    let mut t = vec![0.0; n * n];
    for a in 0..=NEAR_TABLE {
        for b in 0..=a {
            if a == 0 && b == 0 {
                continue;
            }
            let mut tot = 0.0;
            for c1 in [a - 1, a] {
                for c2 in [b - 1, b] {
                    if (c1 == -1 || c1 == 0) && (c2 == -1 || c2 == 0) {
                        continue;
                    }
                    for sa in 0..2 {
                        for sb in 0..2 {
                            let x0 = c1 as f64 + 0.5 * sa as f64;
                            let y0 = c2 as f64 + 0.5 * sb as f64;
                            for (&u, &wu) in gl.nodes.iter().zip(&gl.weights) {
                                let x = x0 + 0.25 * (u + 1.0);
                                let hx = 1.0 - (x - a as f64).abs();
                                for (&v, &wv) in gl.nodes.iter().zip(&gl.weights) {
                                    let y = y0 + 0.25 * (v + 1.0);
                                    let hy = 1.0 - (y - b as f64).abs();
                                    tot += wu * wv * 0.0625 * hx * hy * (x * x + y * y).powf(-0.5 * p);
                                }
                            }
                        }
                    }
                }
            }
            t[(a * (NEAR_TABLE + 1) + b) as usize] = tot;
            t[(b * (NEAR_TABLE + 1) + a) as usize] = tot;
        }
    }
    t
}

fn angular_rule(s: f64, h: f64) -> Vec<(Point, f64)> {
    let gl = gauss_legendre(16);
    let mut out = Vec::with_capacity(8 * gl.len());
    for sector in 0..8 {
        let (t0, t1) = (sector as f64 * PI / 4.0, (sector + 1) as f64 * PI / 4.0);
        for (&u, &w) in gl.nodes.iter().zip(&gl.weights) {
            let th = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * u;
            let (sn, cs) = th.sin_cos();
            let rq = h / cs.abs().max(sn.abs());
            let a = rq.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s) * 0.5 * (t1 - t0) * w;
            out.push(([cs, sn], a));
        }
    }
    out
}

fn box_edge_rule(lo: Point, hi: Point) -> Vec<(Point, Point, f64)> {
    let gl = gauss_legendre(16);
    let corners = [lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
    let panels = 8;
    let mut out = Vec::new();
    for e in 0..4 {
        let (p, q) = (corners[e], corners[(e + 1) % 4]);
        let len = (q[0] - p[0]).hypot(q[1] - p[1]);
        let dir = [(q[0] - p[0]) / len, (q[1] - p[1]) / len];
        for k in 0..panels {
            let (s0, s1) = (len * k as f64 / panels as f64, len * (k + 1) as f64 / panels as f64);
            for (&u, &w) in gl.nodes.iter().zip(&gl.weights) {
                let t = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * u;
                out.push(([p[0] + t * dir[0], p[1] + t * dir[1]], dir, 0.5 * (s1 - s0) * w));
            }
        }
    }
    out
}

fn build_grid_1d(s: f64, h: f64, domain: &Domain) -> Result<Grid> {
    let (a, b) = match domain {
        Domain::Interval { a, b } => (*a, *b),
        _ => return Err(Error::InvalidDomain("1-D grid needs an interval".into())),
    };
    if !(h > 0.0) {
        return Err(Error::GridTooCoarse(format!("spacing {h}")));
    }
    let n = ((b - a) / h).round() as i64;
    if n - 1 < MIN_NODES as i64 {
        return Err(Error::GridTooCoarse(format!("{} interior nodes", (n - 1).max(0))));
    }
    let h = (b - a) / n as f64;
    let margin = (n as f64 / 2.0).ceil() as i64;
    let (lo, hi) = ([-margin, 0], [n + margin, 0]);
    let mut g = Grid {
        s,
        h,
        dim: 1,
        domain: domain.clone(),
        origin: [a, 0.0],
        nodes: Vec::new(),
        index: Vec::new(),
        lo,
        hi,
        node_of: vec![-1; (hi[0] - lo[0] + 1) as usize],
        hat: HatWeights::Line(line_hat_weights(s, (hi[0] - lo[0]) as usize + 1)),
        angular: Vec::new(),
        edge: Vec::new(),
    };
    for m in 1..n {
        let slot = g.window_slot([m, 0]).unwrap();
        g.node_of[slot] = g.nodes.len() as i64;
        g.nodes.push(g.position([m, 0]));
        g.index.push([m, 0]);
    }
    let (elo, ehi) = g.window_extent();
    g.edge = vec![(elo, [1.0, 0.0], 0.0), (ehi, [1.0, 0.0], 0.0)];
    Ok(g)
}

fn build_grid_2d(s: f64, h: f64, domain: &Domain, cap: usize) -> Result<Grid> {
    if !matches!(domain, Domain::Star2d { .. }) {
        return Err(Error::InvalidDomain("2-D grid needs a star domain".into()));
    }
    if !(h > 0.0) {
        return Err(Error::GridTooCoarse(format!("spacing {h}")));
    }
    let c = domain.center();
    let rmax = domain.max_radius();
    let w = (WINDOW_FACTOR * rmax / h).ceil() as i64 + 1;
    let reach = (rmax / h).ceil() as i64 + 1;
    let mut nodes = Vec::new();
    let mut index = Vec::new();
    for i in -reach..=reach {
        for j in -reach..=reach {
            let x = [c[0] + h * i as f64, c[1] + h * j as f64];
            if domain.contains(x) && boundary_distance(domain, x) > 0.0 {
                nodes.push(x);
                index.push([i, j]);
            }
        }
    }
    if nodes.len() > cap {
        return Err(Error::TooManyNodes { nodes: nodes.len(), cap });
    }
    if nodes.len() < MIN_NODES {
        return Err(Error::GridTooCoarse(format!("{} interior nodes", nodes.len())));
    }
    let (lo, hi) = ([-w, -w], [w, w]);
    let side = (2 * w + 1) as usize;
    let mut g = Grid {
        s,
        h,
        dim: 2,
        domain: domain.clone(),
        origin: c,
        nodes,
        index,
        lo,
        hi,
        node_of: vec![-1; side * side],
        hat: HatWeights::Plane(plane_hat_weights(s)),
        angular: angular_rule(s, h),
        edge: Vec::new(),
    };
    for (n, &k) in g.index.iter().enumerate() {
        let slot = g.window_slot(k).unwrap();
        g.node_of[slot] = n as i64;
    }
    let (elo, ehi) = g.window_extent();
    g.edge = box_edge_rule(elo, ehi);
    Ok(g)
}

/// Deformation data at every window point.
struct Pullback {
    x: Vec<Point>,
    jac: Vec<f64>,
    grad: Vec<[[f64; 2]; 2]>,
    /// image of the window boundary: point, image of the unit tangent, weight
    edge: Vec<(Point, Point, f64)>,
}

impl Pullback {
    fn new(grid: &Grid, map: &CompositeMap) -> Self {
        let pts = grid.window_points();
        let mut x = Vec::with_capacity(pts.len());
        let mut jac = Vec::with_capacity(pts.len());
        let mut grad = Vec::with_capacity(pts.len());
        for k in pts {
            let (y, g) = map.apply_with_jacobian(grid.position(k));
            x.push(y);
            jac.push(det(g, grid.dim));
            grad.push(g);
        }
        let edge = grid
            .edge
            .iter()
            .map(|&(y, e, w)| {
                let (z, g) = map.apply_with_jacobian(y);
                (z, [g[0][0] * e[0] + g[0][1] * e[1], g[1][0] * e[0] + g[1][1] * e[1]], w)
            })
            .collect();
        Pullback { x, jac, grad, edge }
    }
}

/// Velocity `χ` of the deformation `𝓕_t = (I + tχ)∘𝓕` at every window point.
struct Velocity {
    v: Vec<Point>,
    div: Vec<f64>,
    grad: Vec<[[f64; 2]; 2]>,
    /// `(χ(Z), Dχ(Z) Z')` on the window boundary
    edge: Vec<(Point, Point)>,
}

impl Velocity {
    fn new(grid: &Grid, pb: &Pullback, chi: &PerturbationField) -> Self {
        let mut v = Vec::with_capacity(pb.x.len());
        let mut div = Vec::with_capacity(pb.x.len());
        let mut grad = Vec::with_capacity(pb.x.len());
        for &y in &pb.x {
            let (val, g) = chi.value_and_jacobian(y);
            v.push(val);
            div.push(if grid.dim == 1 { g[0][0] } else { g[0][0] + g[1][1] });
            grad.push(g);
        }
        let edge = pb
            .edge
            .iter()
            .map(|&(z, zt, _)| {
                let (val, g) = chi.value_and_jacobian(z);
                (val, [g[0][0] * zt[0] + g[0][1] * zt[1], g[1][0] * zt[0] + g[1][1] * zt[1]])
            })
            .collect();
        Velocity { v, div, grad, edge }
    }
}

fn det(g: [[f64; 2]; 2], dim: usize) -> f64 {
    if dim == 1 {
        g[0][0]
    } else {
        g[0][0] * g[1][1] - g[0][1] * g[1][0]
    }
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Fills row `i` of `L` (or of its derivative when `vel` is given).
fn fill_row(grid: &Grid, pb: &Pullback, vel: Option<&Velocity>, i: usize, row: &mut [f64]) {
    let s = grid.s;
    let dim = grid.dim;
    let p = dim as f64 + 2.0 * s;
    let h = grid.h;
    let hs = h.powf(-2.0 * s);
    let ki = grid.index[i];
    let si = grid.window_slot(ki).unwrap();
    let (xi, ji) = (pb.x[si], pb.jac[si]);
    let mut diag = 0.0;

    for (slot, kq) in grid.window_points().into_iter().enumerate() {
        if slot == si {
            continue;
        }
        let dk = [kq[0] - ki[0], kq[1] - ki[1]];
        let w = grid.hat_weight(dk) * hs;
        let d2 = h * h * (dk[0] * dk[0] + dk[1] * dk[1]) as f64;
        let xq = pb.x[slot];
        let dx = [xi[0] - xq[0], xi[1] - xq[1]];
        let dx2 = dx[0] * dx[0] + dx[1] * dx[1];
        let rho = (d2 / dx2).powf(0.5 * p) * ji * pb.jac[slot];
        let val = match vel {
            None => w * rho,
            Some(v) => {
                let dv = [v.v[si][0] - v.v[slot][0], v.v[si][1] - v.v[slot][1]];
                w * rho * (v.div[si] + v.div[slot] - p * (dx[0] * dv[0] + dx[1] * dv[1]) / dx2)
            }
        };
        diag += val;
        if let Some(q) = grid.node_at(kq) {
            row[q] -= val;
        }
    }

    diag += tail(grid, pb, vel, si, p);

    // near-field Taylor correction
    let g = pb.grad[si];
    if dim == 1 {
        let gi = g[0][0].abs();
        let mut moment = ji * ji * gi.powf(-p) * 2.0 * h.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
        if let Some(v) = vel {
            moment *= (2.0 - p) * v.grad[si][0][0];
        }
        let c = 0.5 * moment / (h * h);
        diag += 2.0 * c;
        for e in [-1, 1] {
            if let Some(q) = grid.node_at([ki[0] + e, 0]) {
                row[q] -= c;
            }
        }
    } else {
        let mut m = [[0.0; 2]; 2];
        for &(om, a) in &grid.angular {
            let go = [g[0][0] * om[0] + g[0][1] * om[1], g[1][0] * om[0] + g[1][1] * om[1]];
            let n2 = go[0] * go[0] + go[1] * go[1];
            let base = a * n2.powf(-0.5 * p);
            let factor = match vel {
                None => ji * ji,
                Some(v) => {
                    let dc = v.grad[si];
                    let dgo = [dc[0][0] * go[0] + dc[0][1] * go[1], dc[1][0] * go[0] + dc[1][1] * go[1]];
                    ji * ji * (2.0 * v.div[si] - p * (go[0] * dgo[0] + go[1] * dgo[1]) / n2)
                }
            };
            for k in 0..2 {
                for l in 0..2 {
                    m[k][l] += factor * base * om[k] * om[l];
                }
            }
        }
        let h2 = h * h;
        diag += (m[0][0] + m[1][1]) / h2;
        let stencil = [
            ([1, 0], -0.5 * m[0][0] / h2),
            ([-1, 0], -0.5 * m[0][0] / h2),
            ([0, 1], -0.5 * m[1][1] / h2),
            ([0, -1], -0.5 * m[1][1] / h2),
            ([1, 1], -0.25 * m[0][1] / h2),
            ([-1, -1], -0.25 * m[0][1] / h2),
            ([1, -1], 0.25 * m[0][1] / h2),
            ([-1, 1], 0.25 * m[0][1] / h2),
        ];
        for (off, c) in stencil {
            if let Some(q) = grid.node_at([ki[0] + off[0], ki[1] + off[1]]) {
                row[q] += c;
            }
        }
    }
    row[i] += diag;
}

/// `J_i ∫_{ℝⁿ∖𝓕(window)} |X_i - z|^{-n-2s} dz` or its derivative.
fn tail(grid: &Grid, pb: &Pullback, vel: Option<&Velocity>, si: usize, p: f64) -> f64 {
    let s = grid.s;
    let (xi, ji) = (pb.x[si], pb.jac[si]);
    if grid.dim == 1 {
        let (za, zb) = (pb.edge[0].0[0], pb.edge[1].0[0]);
        let (da, db) = (xi[0] - za, zb - xi[0]);
        let base = (da.powf(-2.0 * s) + db.powf(-2.0 * s)) / (2.0 * s);
        match vel {
            None => ji * base,
            Some(v) => {
                let (va, vb) = (v.edge[0].0[0], v.edge[1].0[0]);
                let vi = v.v[si][0];
                let dbase = -da.powf(-2.0 * s - 1.0) * (vi - va) - db.powf(-2.0 * s - 1.0) * (vb - vi);
                ji * (v.div[si] * base + dbase)
            }
        }
    } else {
        let mut acc = 0.0;
        for (k, &(z, zt, w)) in pb.edge.iter().enumerate() {
            let r = [z[0] - xi[0], z[1] - xi[1]];
            let r2 = r[0] * r[0] + r[1] * r[1];
            let rp = r2.powf(-0.5 * p);
            let g = cross(r, zt) * rp;
            match vel {
                None => acc += w * g,
                Some(v) => {
                    let (cz, czt) = v.edge[k];
                    let dr = [cz[0] - v.v[si][0], cz[1] - v.v[si][1]];
                    let dg = (cross(dr, zt) + cross(r, czt)) * rp
                        - p * g * (r[0] * dr[0] + r[1] * dr[1]) / r2;
                    acc += w * (v.div[si] * g + dg);
                }
            }
        }
        ji * acc / (2.0 * s)
    }
}

fn assemble_rows(grid: &Grid, pb: &Pullback, vel: Option<&Velocity>) -> DMatrix<f64> {
    let n = grid.nodes.len();
    let mut buf = vec![0.0; n * n];
    buf.par_chunks_mut(n).enumerate().for_each(|(i, row)| fill_row(grid, pb, vel, i, row));
    let l = DMatrix::from_row_slice(n, n, &buf);
    let c = fractional_constant(grid.dim, grid.s) * grid.h.powi(grid.dim as i32);
    (&l + l.transpose()) * (0.5 * c)
}

fn mass_diag(grid: &Grid, pb: &Pullback, vel: Option<&Velocity>) -> DMatrix<f64> {
    let hn = grid.h.powi(grid.dim as i32);
    let n = grid.nodes.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i != j {
            return 0.0;
        }
        let si = grid.window_slot(grid.index[i]).unwrap();
        match vel {
            None => hn * pb.jac[si],
            Some(v) => hn * pb.jac[si] * v.div[si],
        }
    })
}

fn lattice_operator(grid: Arc<Grid>, map: CompositeMap) -> DiscreteOperator {
    let pb = Pullback::new(&grid, &map);
    let stiffness = assemble_rows(&grid, &pb, None);
    let mass = mass_diag(&grid, &pb, None);
    DiscreteOperator::new(stiffness, mass, Basis::Grid { grid, map })
}

/// Uniform vertex lattice on an interval (spacing adjusted so that `(b - a)/h` is an
/// integer).
pub fn assemble_1d_grid(s: f64, h: f64, interval: &Domain) -> Result<DiscreteOperator> {
    check_order(s)?;
    let grid = build_grid_1d(s, h, interval)?;
    Ok(lattice_operator(Arc::new(grid), CompositeMap::identity()))
}

/// Square lattice centered at the domain center, nodes strictly inside the domain.
pub fn assemble_2d_grid(s: f64, h: f64, domain: &Domain) -> Result<DiscreteOperator> {
    assemble_2d_grid_capped(s, h, domain, DEFAULT_NODE_CAP)
}

pub fn assemble_2d_grid_capped(s: f64, h: f64, domain: &Domain, cap: usize) -> Result<DiscreteOperator> {
    check_order(s)?;
    let grid = build_grid_2d(s, h, domain, cap)?;
    Ok(lattice_operator(Arc::new(grid), CompositeMap::identity()))
}

fn grid_parts(base: &DiscreteOperator) -> Result<(&Arc<Grid>, &CompositeMap)> {
    match &base.basis {
        Basis::Grid { grid, map } => Ok((grid, map)),
        Basis::Spectral1d(_) => {
            Err(Error::Unsupported("transformed forms are assembled on lattices".into()))
        }
    }
}

/// Pull-back of the lattice of `base` through the full deformation `map` of the reference
/// domain.
pub fn transformed_form(base: &DiscreteOperator, map: &CompositeMap) -> Result<DiscreteOperator> {
    let (grid, _) = grid_parts(base)?;
    for step in &map.steps {
        grid.check_support(step)?;
    }
    Ok(lattice_operator(grid.clone(), map.clone()))
}

/// Transformed form for `Ω_ψ = (I + ψ)Ω` on the unchanged reference nodes (composed after
/// any deformation already carried by `base`).
pub fn assemble_transformed_form(base: &DiscreteOperator, psi: &PerturbationField) -> Result<DiscreteOperator> {
    let (grid, map) = grid_parts(base)?;
    if psi.is_zero() {
        return Ok(base.clone());
    }
    let bound = psi.c1_norm_bound(&grid.domain);
    if bound >= 1.0 {
        return Err(Error::TooLarge(bound));
    }
    transformed_form(base, &map.then(psi.clone(), &grid.domain))
}

/// Derivatives at `t = 0` of the stiffness and mass of the pull-back through
/// `(I + tχ)∘𝓕`, where `𝓕` is the deformation carried by `base`.
pub fn derivative_along(base: &DiscreteOperator, chi: &PerturbationField) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (grid, map) = grid_parts(base)?;
    grid.check_support(chi)?;
    let n = grid.nodes.len();
    if chi.is_zero() {
        return Ok((DMatrix::zeros(n, n), DMatrix::zeros(n, n)));
    }
    let pb = Pullback::new(grid, map);
    let vel = Velocity::new(grid, &pb, chi);
    Ok((assemble_rows(grid, &pb, Some(&vel)), mass_diag(grid, &pb, Some(&vel))))
}

/// Matrix of `C ∫∫ (u(ξ) - u(η))(v(ξ) - v(η)) K(ξ, η)` with the derivative kernel
/// `K = ½[div ψ(ξ) + div ψ(η) - (n + 2s)(ξ - η)·(ψ(ξ) - ψ(η))/|ξ - η|²] |ξ - η|^{-n-2s}`:
/// the `t`-derivative at zero of the transformed stiffness.
pub fn assemble_derivative_kernel(base: &DiscreteOperator, psi: &PerturbationField) -> Result<DMatrix<f64>> {
    Ok(derivative_along(base, psi)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_weights_sum_to_exterior_integral() {
        let s = 0.3;
        let w = line_hat_weights(s, 200_000);
        let last = (w.len() - 1) as f64;
        let tail = (last + 0.5).powf(-2.0 * s) / (2.0 * s);
        let total: f64 = 2.0 * (w.iter().sum::<f64>() + tail);
        assert!((total - 1.0 / s).abs() < 1e-8, "{total}");
    }

    #[test]
    fn plane_weights_are_symmetric_and_positive() {
        let t = plane_hat_weights(0.5);
        let n = (NEAR_TABLE + 1) as usize;
        for a in 0..n {
            for b in 0..n {
                if a + b > 0 {
                    assert!(t[a * n + b] > 0.0);
                    assert_eq!(t[a * n + b], t[b * n + a]);
                }
            }
        }
        // far table entries approach the midpoint rule
        let p: f64 = 3.0;
        let r2: f64 = 200.0;
        let approx = r2.powf(-0.5 * p) * (1.0 + p * p / (12.0 * r2));
        assert!((t[10 * n + 10] / approx - 1.0).abs() < 1e-3);
    }
}
