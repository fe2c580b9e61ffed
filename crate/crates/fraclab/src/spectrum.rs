//! Generalized symmetric eigenproblems, multiplicity clusters and eigenvalue tracking.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::{Basis, DiscreteOperator};
use crate::{Error, Result};

/// Relative cluster tolerance for the weighted spectral basis.
pub const SPECTRAL_CLUSTER_TOL: f64 = 1e-7;
/// Relative cluster tolerance for lattices in one dimension.
pub const GRID1D_CLUSTER_TOL: f64 = 1e-3;
/// Relative cluster tolerance for planar lattices.
pub const GRID2D_CLUSTER_TOL: f64 = 2e-2;
/// Minimum overlap for an unambiguous match in [`track`].
pub const TRACK_OVERLAP: f64 = 0.6;

/// Inner product in which eigenvectors are orthonormal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `vᵀ M v = 1` (the L² pairing, or the weighted pairing for weighted problems).
    L2,
    /// `vᵀ A v = 1` (the Dirichlet form).
    Energy,
}

/// Ascending eigenvalues and eigenvectors (as columns) of a pencil.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
    pub normalization: Normalization,
    pub operator: Arc<DiscreteOperator>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn vector(&self, k: usize) -> DVector<f64> {
        self.eigenvectors.column(k).into_owned()
    }

    /// `‖(A - λM)v‖ / (‖A‖ ‖v‖)` for pair `k`.
    pub fn residual(&self, k: usize) -> f64 {
        let op = &self.operator;
        let v = self.vector(k);
        let r = &op.stiffness * &v - self.eigenvalues[k] * (&op.mass * &v);
        r.norm() / (op.stiffness.norm() * v.norm())
    }

    /// Gram matrix `Vᵀ B V` in the given inner product.
    pub fn gram(&self, product: Normalization) -> DMatrix<f64> {
        let b = match product {
            Normalization::L2 => &self.operator.mass,
            Normalization::Energy => &self.operator.stiffness,
        };
        self.eigenvectors.transpose() * b * &self.eigenvectors
    }

    /// Smallest relative gap `(λ_{k+1} - λ_k)/λ_k` among the first `q` eigenvalues.
    pub fn min_relative_gap(&self, q: usize) -> f64 {
        let q = q.min(self.len());
        (1..q)
            .map(|k| relative_gap(self.eigenvalues[k - 1], self.eigenvalues[k]))
            .fold(f64::INFINITY, f64::min)
    }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (b - a).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Default cluster tolerance for the discretization of `op`.
pub fn default_cluster_tolerance(op: &DiscreteOperator) -> f64 {
    match &op.basis {
        Basis::Spectral1d(_) => SPECTRAL_CLUSTER_TOL,
        Basis::Grid { grid, .. } if grid.dim == 1 => GRID1D_CLUSTER_TOL,
        Basis::Grid { .. } => GRID2D_CLUSTER_TOL,
    }
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    m.iter().enumerate().all(|(idx, &v)| v == 0.0 || idx % m.nrows() == idx / m.nrows())
}

/// First `k` eigenpairs of `A v = λ M v`, ascending, with `vᵀ M v = 1`.
pub fn solve(op: &DiscreteOperator, k: usize) -> Result<Spectrum> {
    let n = op.size();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("requested {k} eigenpairs of a size-{n} pencil")));
    }
    let (values, vectors) = if is_diagonal(&op.mass) {
        let d = op.mass.diagonal();
        if d.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::CholeskyFailure);
        }
        let inv: DVector<f64> = d.map(|v| 1.0 / v.sqrt());
        let c = DMatrix::from_fn(n, n, |i, j| op.stiffness[(i, j)] * inv[i] * inv[j]);
        let eig = SymmetricEigen::new(c);
        let mut v = eig.eigenvectors;
        for (i, mut row) in v.row_iter_mut().enumerate() {
            row *= inv[i];
        }
        (eig.eigenvalues, v)
    } else {
        let chol = op.mass.clone().cholesky().ok_or(Error::CholeskyFailure)?;
        let l = chol.l();
        let y = l.solve_lower_triangular(&op.stiffness).ok_or(Error::CholeskyFailure)?;
        let c = l.solve_lower_triangular(&y.transpose()).ok_or(Error::CholeskyFailure)?;
        let c = 0.5 * (&c + c.transpose());
        let eig = SymmetricEigen::new(c);
        let v = l.transpose().solve_upper_triangular(&eig.eigenvectors).ok_or(Error::CholeskyFailure)?;
        (eig.eigenvalues, v)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = DMatrix::zeros(n, k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        let mut col = vectors.column(idx).into_owned();
        let norm = (col.transpose() * &op.mass * &col)[(0, 0)].sqrt();
        col /= norm;
        let pivot = col.iter().copied().fold(0.0, |m: f64, v| if v.abs() > m.abs() { v } else { m });
        if pivot < 0.0 {
            col = -col;
        }
        out.set_column(c, &col);
    }
    Ok(Spectrum {
        eigenvalues: order.iter().take(k).map(|&i| values[i]).collect(),
        eigenvectors: out,
        normalization: Normalization::L2,
        operator: Arc::new(op.clone()),
    })
}

/// A maximal run of numerically coincident eigenvalues, indices `start..=end` (0-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub start: usize,
    pub end: usize,
    pub representative: f64,
    pub rel_tol: f64,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_simple(&self) -> bool {
        self.start == self.end
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

/// Groups consecutive eigenvalues whose relative gap is below `rel_tol`.
pub fn cluster(spec: &Spectrum, rel_tol: f64) -> Vec<Cluster> {
    cluster_values(&spec.eigenvalues, rel_tol)
}

pub fn cluster_values(values: &[f64], rel_tol: f64) -> Vec<Cluster> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=values.len() {
        if k == values.len() || relative_gap(values[k - 1], values[k]) >= rel_tol {
            if k > start {
                let rep = values[start..k].iter().sum::<f64>() / (k - start) as f64;
                out.push(Cluster { start, end: k - 1, representative: rep, rel_tol });
            }
            start = k;
        }
    }
    out
}

/// Cluster id (position in [`cluster`]) of every eigenvalue.
pub fn cluster_ids(clusters: &[Cluster]) -> Vec<usize> {
    let mut ids = Vec::new();
    for (c, cl) in clusters.iter().enumerate() {
        ids.extend(std::iter::repeat_n(c, cl.len()));
    }
    ids
}

/// Re-orthonormalizes the eigenvectors in the requested inner product (symmetric Löwdin
/// orthonormalization, which only rescales simple eigenvectors).
pub fn renormalize(spec: &Spectrum, target: Normalization) -> Spectrum {
    let g = spec.gram(target);
    let eig = SymmetricEigen::new(0.5 * (&g + g.transpose()));
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    let w = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    let mut out = spec.clone();
    out.eigenvectors = &spec.eigenvectors * w;
    out.normalization = target;
    out
}

/// Eigenvalue paths across a sequence of pencils, matched by eigenvector overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tracks {
    /// `paths[p][j]`: value of path `p` on pencil `j`. Path `p` starts at eigenvalue `p`.
    pub paths: Vec<Vec<f64>>,
    /// `indices[p][j]`: eigenvalue index carried by path `p` on pencil `j`.
    pub indices: Vec<Vec<usize>>,
    /// `(j, p, q)`: paths `p < q` swap order between pencils `j - 1` and `j`.
    pub crossings: Vec<(usize, usize, usize)>,
}

/// Solves every pencil (in parallel) and matches eigenvalue paths by overlap.
pub fn track(pencils: &[DiscreteOperator], k: usize) -> Result<Tracks> {
    let spectra: Vec<Spectrum> = pencils
        .par_iter()
        .map(|op| solve(op, (k + 2).min(op.size())))
        .collect::<Result<_>>()?;
    track_spectra(&spectra, k)
}

/// Matches the first `k` eigenvalues of `spectra[0]` through the sequence. Overlaps are
/// `|v_aᵀ M v_b|` with the mass of the later pencil; assignment is greedy by decreasing
/// overlap and must reach [`TRACK_OVERLAP`] for every path.
pub fn track_spectra(spectra: &[Spectrum], k: usize) -> Result<Tracks> {
    let Some(first) = spectra.first() else {
        return Ok(Tracks { paths: Vec::new(), indices: Vec::new(), crossings: Vec::new() });
    };
    let k = k.min(first.len());
    let mut idx: Vec<Vec<usize>> = (0..k).map(|p| vec![p]).collect();
    let mut crossings = Vec::new();
    for j in 1..spectra.len() {
        let (prev, next) = (&spectra[j - 1], &spectra[j]);
        let o = (prev.eigenvectors.transpose() * &next.operator.mass * &next.eigenvectors).abs();
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for p in 0..k {
            let a = idx[p][j - 1];
            for b in 0..next.len() {
                pairs.push((o[(a, b)], p, b));
            }
        }
        pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
        let mut assigned = vec![None; k];
        let mut taken = vec![false; next.len()];
        for (ov, p, b) in pairs {
            if assigned[p].is_none() && !taken[b] {
                if ov < TRACK_OVERLAP {
                    return Err(Error::TrackingAmbiguous(j));
                }
                assigned[p] = Some(b);
                taken[b] = true;
            }
        }
        for p in 0..k {
            idx[p].push(assigned[p].ok_or(Error::TrackingAmbiguous(j))?);
        }
        for p in 0..k {
            for q in p + 1..k {
                let before = idx[p][j - 1] < idx[q][j - 1];
                let after = idx[p][j] < idx[q][j];
                if before != after {
                    crossings.push((j, p, q));
                }
            }
        }
    }
    let paths = idx
        .iter()
        .map(|row| row.iter().enumerate().map(|(j, &b)| spectra[j].eigenvalues[b]).collect())
        .collect();
    Ok(Tracks { paths, indices: idx, crossings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::assemble_1d_spectral;
    use crate::geometry::Domain;

    #[test]
    fn clustering_examples() {
        let c = cluster_values(&[1.0, 2.0, 2.01, 3.0], 0.02);
        assert_eq!(c.len(), 3);
        assert_eq!((c[1].start, c[1].end), (1, 2));
        assert!(cluster_values(&[1.0, 2.0, 3.0], 1e-6).iter().all(Cluster::is_simple));
        assert_eq!(cluster_values(&[1.0, 1.1, 1.2], 0.5).len(), 1);
    }

    #[test]
    fn energy_renormalization_scales_by_eigenvalue() {
        let op = assemble_1d_spectral(0.5, 12, &Domain::interval(-1.0, 1.0).unwrap()).unwrap();
        let sp = solve(&op, 4).unwrap();
        let e = renormalize(&sp, Normalization::Energy);
        for k in 0..4 {
            let v = e.vector(k);
            let l2 = (v.transpose() * &op.mass * &v)[(0, 0)];
            assert!((1.0 / l2 - sp.eigenvalues[k]).abs() < 1e-9 * sp.eigenvalues[k]);
        }
        let back = renormalize(&e, Normalization::L2);
        assert!((back.eigenvectors.clone() - sp.eigenvectors.clone()).amax() < 1e-9);
    }
}
