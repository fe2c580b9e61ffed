//! Matrix representations of the fractional Dirichlet form and the L² pairing.
//!
//! Three bases are available: weighted Jacobi polynomials on an interval, and vertex
//! (hat-function) lattices in one and two dimensions. Lattice operators can be pulled back
//! through a deformation `𝓕` of the reference domain, which gives the transformed form
//! with kernel `|𝓕ξ - 𝓕η|^{-n-2s} J(ξ) J(η)` on the unchanged reference nodes.

mod lattice;
mod spectral1d;

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use lattice::{
    assemble_1d_grid, assemble_2d_grid, assemble_2d_grid_capped, assemble_derivative_kernel, assemble_transformed_form,
    derivative_along, transformed_form, Grid, DEFAULT_NODE_CAP,
};
pub use spectral1d::{assemble_1d_spectral, SpectralInfo};

use crate::geometry::{CompositeMap, Point};
use crate::{Error, Result};

/// Which basis a [`DiscreteOperator`] lives in.
#[derive(Debug, Clone)]
pub enum Basis {
    Spectral1d(SpectralInfo),
    /// A lattice, possibly pulled back through `map`.
    Grid { grid: Arc<Grid>, map: CompositeMap },
}

impl Basis {
    pub fn order(&self) -> f64 {
        match self {
            Basis::Spectral1d(i) => i.s,
            Basis::Grid { grid, .. } => grid.s,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Basis::Spectral1d(_) => 1,
            Basis::Grid { grid, .. } => grid.dim,
        }
    }

    pub fn grid(&self) -> Option<&Arc<Grid>> {
        match self {
            Basis::Grid { grid, .. } => Some(grid),
            _ => None,
        }
    }

    /// Short human-readable tag.
    pub fn describe(&self) -> String {
        match self {
            Basis::Spectral1d(i) => {
                format!("spectral1d s={} N={} interval=({}, {})", i.s, i.n, i.a, i.b)
            }
            Basis::Grid { grid, map } => format!(
                "grid{}d s={} h={} nodes={} deformed={}",
                grid.dim,
                grid.s,
                grid.h,
                grid.nodes.len(),
                !map.is_identity()
            ),
        }
    }
}

/// Stiffness and mass of a pencil `(A, M)`; eigenpairs solve `A v = λ M v`.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub stiffness: DMatrix<f64>,
    pub mass: DMatrix<f64>,
    pub basis: Basis,
    /// Potential `a` already added to the stiffness.
    pub potential: Option<ScalarField>,
    /// Weight `α` of the mass, when it is not the plain L² pairing.
    pub weight: Option<ScalarField>,
}

impl DiscreteOperator {
    pub fn new(stiffness: DMatrix<f64>, mass: DMatrix<f64>, basis: Basis) -> Self {
        DiscreteOperator { stiffness, mass, basis, potential: None, weight: None }
    }

    pub fn size(&self) -> usize {
        self.stiffness.nrows()
    }

    pub fn order(&self) -> f64 {
        self.basis.order()
    }

    /// Largest asymmetry of either matrix relative to its largest entry.
    pub fn asymmetry(&self) -> f64 {
        let rel = |m: &DMatrix<f64>| {
            let scale = m.amax().max(f64::MIN_POSITIVE);
            (m - m.transpose()).amax() / scale
        };
        rel(&self.stiffness).max(rel(&self.mass))
    }

    /// Matrix of the unweighted pairing `∫ u v` (after pull-back, `∫ u v J`).
    pub fn l2_mass(&self) -> DMatrix<f64> {
        if self.weight.is_none() {
            return self.mass.clone();
        }
        match &self.basis {
            Basis::Spectral1d(info) => info.weighted_mass(|_| 1.0),
            Basis::Grid { grid, map } => {
                let hn = grid.h.powi(grid.dim as i32);
                let d: Vec<f64> = grid
                    .nodes
                    .iter()
                    .map(|&x| {
                        let (_, g) = map.apply_with_jacobian(x);
                        hn * if grid.dim == 1 { g[0][0] } else { g[0][0] * g[1][1] - g[0][1] * g[1][0] }
                    })
                    .collect();
                DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d))
            }
        }
    }

    /// `λ α(x) - a(x)`: the right-hand side factor `f/u` of `(-Δ)^s u = f` for an
    /// eigenfunction with eigenvalue `λ`.
    pub fn source_factor(&self, lambda: f64, x: Point) -> Option<f64> {
        let alpha = match &self.weight {
            None => 1.0,
            Some(w) => w.eval(x)?,
        };
        let a = match &self.potential {
            None => 0.0,
            Some(p) => p.eval(x)?,
        };
        Some(lambda * alpha - a)
    }

    /// Nodal version of [`source_factor`](Self::source_factor) for lattices.
    pub fn source_factor_nodal(&self, lambda: f64) -> Result<Vec<f64>> {
        let n = self.size();
        let alpha = match &self.weight {
            None => vec![1.0; n],
            Some(w) => w.nodal_values(self)?,
        };
        let a = match &self.potential {
            None => vec![0.0; n],
            Some(p) => p.nodal_values(self)?,
        };
        Ok(alpha.iter().zip(&a).map(|(al, a)| lambda * al - a).collect())
    }

    /// Values of a scalar field at the points where this basis samples functions:
    /// nodes of a lattice (physical positions after deformation).
    pub fn sample_points(&self) -> Option<Vec<Point>> {
        match &self.basis {
            Basis::Grid { grid, map } => Some(grid.nodes.iter().map(|&x| map.apply(x)).collect()),
            Basis::Spectral1d(_) => None,
        }
    }
}

/// A scalar coefficient field for potentials and weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScalarField {
    Constant { value: f64 },
    /// `Σ c · x^i y^j` over `(i, j, c)` triples.
    Polynomial { terms: Vec<(u32, u32, f64)> },
    /// Values at the nodes of a lattice operator.
    Nodal { values: Vec<f64> },
}

impl ScalarField {
    pub fn constant(value: f64) -> Self {
        ScalarField::Constant { value }
    }

    /// `t·f`.
    pub fn scaled(&self, t: f64) -> Self {
        match self {
            ScalarField::Constant { value } => ScalarField::Constant { value: t * value },
            ScalarField::Polynomial { terms } => {
                ScalarField::Polynomial { terms: terms.iter().map(|&(i, j, c)| (i, j, t * c)).collect() }
            }
            ScalarField::Nodal { values } => {
                ScalarField::Nodal { values: values.iter().map(|v| t * v).collect() }
            }
        }
    }

    fn as_terms(&self) -> Option<Vec<(u32, u32, f64)>> {
        match self {
            ScalarField::Constant { value } => Some(vec![(0, 0, *value)]),
            ScalarField::Polynomial { terms } => Some(terms.clone()),
            ScalarField::Nodal { .. } => None,
        }
    }

    /// `f + g`; nodal as soon as either summand is nodal (values at the nodes of `op`).
    pub fn sum(&self, other: &ScalarField, op: &DiscreteOperator) -> Result<ScalarField> {
        if let (ScalarField::Constant { value: a }, ScalarField::Constant { value: b }) = (self, other) {
            return Ok(ScalarField::Constant { value: a + b });
        }
        if let (Some(mut a), Some(b)) = (self.as_terms(), other.as_terms()) {
            a.extend(b);
            return Ok(ScalarField::Polynomial { terms: a });
        }
        let (a, b) = (self.nodal_values(op)?, other.nodal_values(op)?);
        Ok(ScalarField::Nodal { values: a.iter().zip(&b).map(|(x, y)| x + y).collect() })
    }

    pub fn eval(&self, x: Point) -> Option<f64> {
        match self {
            ScalarField::Constant { value } => Some(*value),
            ScalarField::Polynomial { terms } => Some(
                terms
                    .iter()
                    .map(|&(i, j, c)| c * x[0].powi(i as i32) * x[1].powi(j as i32))
                    .sum(),
            ),
            ScalarField::Nodal { .. } => None,
        }
    }

    /// Values at the lattice nodes of `op`.
    pub fn nodal_values(&self, op: &DiscreteOperator) -> Result<Vec<f64>> {
        let pts = op
            .sample_points()
            .ok_or_else(|| Error::Unsupported("nodal values need a lattice operator".into()))?;
        match self {
            ScalarField::Nodal { values } => {
                if values.len() != pts.len() {
                    return Err(Error::InvalidArgument(format!(
                        "nodal field has {} values for {} nodes",
                        values.len(),
                        pts.len()
                    )));
                }
                Ok(values.clone())
            }
            _ => Ok(pts.iter().map(|&x| self.eval(x).unwrap()).collect()),
        }
    }

    /// Matrix of `∫ f φ_i φ_j` in the basis of `op`, relative to the operator's own mass.
    pub fn pairing_matrix(&self, op: &DiscreteOperator) -> Result<DMatrix<f64>> {
        match &op.basis {
            Basis::Grid { .. } => {
                let v = self.nodal_values(op)?;
                let mut m = op.l2_mass();
                for (i, vi) in v.iter().enumerate() {
                    m[(i, i)] *= vi;
                }
                Ok(m)
            }
            Basis::Spectral1d(info) => {
                if matches!(self, ScalarField::Nodal { .. }) {
                    return Err(Error::Unsupported("nodal fields on a spectral basis".into()));
                }
                Ok(info.weighted_mass(|x| self.eval([x, 0.0]).unwrap()))
            }
        }
    }

    /// Supremum of `|f|` over the sample points (lattice) or a fine sampling (spectral).
    pub fn sup_norm(&self, op: &DiscreteOperator) -> Result<f64> {
        match &op.basis {
            Basis::Grid { .. } => {
                Ok(self.nodal_values(op)?.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
            }
            Basis::Spectral1d(info) => Ok((0..=1024)
                .map(|k| info.a + (info.b - info.a) * k as f64 / 1024.0)
                .map(|x| self.eval([x, 0.0]).unwrap_or(0.0).abs())
                .fold(0.0, f64::max)),
        }
    }
}

/// Adds `∫ a u v` to the stiffness: the potential problem `(-Δ)^s u + a u = λ u`.
pub fn assemble_potential(base: &DiscreteOperator, a: &ScalarField) -> Result<DiscreteOperator> {
    let mut out = base.clone();
    if matches!(a, ScalarField::Constant { value } if *value == 0.0) {
        return Ok(out);
    }
    out.stiffness += a.pairing_matrix(base)?;
    let sym = 0.5 * (&out.stiffness + out.stiffness.transpose());
    out.stiffness = sym;
    out.potential = Some(match &base.potential {
        None => a.clone(),
        Some(p) => p.sum(a, base)?,
    });
    if out.stiffness.clone().cholesky().is_none() {
        return Err(Error::IndefiniteForm);
    }
    Ok(out)
}

/// Replaces the mass by `∫ α u v`: the weighted problem `(-Δ)^s u = λ α u`.
pub fn assemble_weight(base: &DiscreteOperator, alpha: &ScalarField) -> Result<DiscreteOperator> {
    if matches!(alpha, ScalarField::Constant { value } if *value == 1.0) {
        return Ok(base.clone());
    }
    match &base.basis {
        Basis::Grid { .. } => {
            if let Some(i) = alpha.nodal_values(base)?.iter().position(|&v| v <= 0.0) {
                return Err(Error::NonPositiveWeight(i));
            }
        }
        Basis::Spectral1d(_) => {
            if alpha.sup_norm(base)? == 0.0 || negative_somewhere(alpha, base) {
                return Err(Error::NonPositiveWeight(0));
            }
        }
    }
    let mut out = base.clone();
    out.mass = alpha.pairing_matrix(base)?;
    out.weight = Some(alpha.clone());
    Ok(out)
}

fn negative_somewhere(alpha: &ScalarField, op: &DiscreteOperator) -> bool {
    match &op.basis {
        Basis::Spectral1d(info) => (0..=1024)
            .map(|k| info.a + (info.b - info.a) * k as f64 / 1024.0)
            .any(|x| alpha.eval([x, 0.0]).unwrap_or(0.0) <= 0.0),
        _ => false,
    }
}
