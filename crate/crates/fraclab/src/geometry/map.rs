use serde::{Deserialize, Serialize};

use super::{Domain, PerturbationField, Point};
use crate::{Error, Result};

/// `𝓕_L = (I + ψ_L) ∘ … ∘ (I + ψ_1)` together with the C¹ bookkeeping of the steps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompositeMap {
    pub steps: Vec<PerturbationField>,
    /// `‖ψ_l‖_{C¹}` of each step.
    pub norms: Vec<f64>,
    /// Bound on `‖𝓕_l - 𝓕_{l-1}‖_{C¹}`: `‖ψ_l‖ Π_{m<l} (1 + ‖ψ_m‖)`.
    pub step_bounds: Vec<f64>,
}

impl CompositeMap {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn is_identity(&self) -> bool {
        self.steps.iter().all(|s| s.is_zero())
    }

    /// Appends `I + ψ` after the current map, measuring `ψ` near `domain`.
    pub fn then(&self, psi: PerturbationField, domain: &Domain) -> Self {
        let norm = psi.c1_norm_bound(domain);
        let growth: f64 = self.norms.iter().map(|n| 1.0 + n).product();
        let mut out = self.clone();
        out.steps.push(psi);
        out.norms.push(norm);
        out.step_bounds.push(norm * growth);
        out
    }

    /// `𝓕(x)`.
    pub fn apply(&self, x: Point) -> Point {
        let mut y = x;
        for s in &self.steps {
            let v = s.value(y);
            y = [y[0] + v[0], y[1] + v[1]];
        }
        y
    }

    /// `(𝓕(x), D𝓕(x))`.
    pub fn apply_with_jacobian(&self, x: Point) -> (Point, [[f64; 2]; 2]) {
        let mut y = x;
        let mut j = [[1.0, 0.0], [0.0, 1.0]];
        for s in &self.steps {
            let (v, d) = s.value_and_jacobian(y);
            let g = [[1.0 + d[0][0], d[0][1]], [d[1][0], 1.0 + d[1][1]]];
            j = mat_mul(g, j);
            y = [y[0] + v[0], y[1] + v[1]];
        }
        (y, j)
    }

    /// Bound on `‖𝓕 - I‖_{C¹}`.
    pub fn distance_bound(&self) -> f64 {
        self.step_bounds.iter().fold(0.0, |a, b| a + b)
    }

    /// Sum of the step norms.
    pub fn total_norm(&self) -> f64 {
        self.norms.iter().fold(0.0, |a, b| a + b)
    }
}

pub(crate) fn mat_mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

/// Composes `I + ψ_l` in order, checking `‖ψ_l‖_{C¹} ≤ σ_l` when budgets are given.
pub fn compose_maps(
    maps: &[PerturbationField],
    budgets: Option<&[f64]>,
    domain: &Domain,
) -> Result<CompositeMap> {
    let mut out = CompositeMap::identity();
    for (l, psi) in maps.iter().enumerate() {
        out = out.then(psi.clone(), domain);
        if let Some(b) = budgets {
            let budget = b.get(l).copied().unwrap_or(0.0);
            let norm = out.norms[l];
            if norm > budget {
                return Err(Error::BudgetExceeded { step: l + 1, norm, budget });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_identity() {
        let d = Domain::disk([0.0, 0.0], 1.0).unwrap();
        let m = compose_maps(&[], None, &d).unwrap();
        assert_eq!(m.apply([0.3, -0.2]), [0.3, -0.2]);
    }

    #[test]
    fn dilations_multiply() {
        let d = Domain::disk([0.0, 0.0], 1.0).unwrap();
        let m = compose_maps(
            &[PerturbationField::dilation(0.1), PerturbationField::dilation(0.2)],
            None,
            &d,
        )
        .unwrap();
        let y = m.apply([0.5, 0.25]);
        assert!((y[0] - 0.5 * 1.1 * 1.2).abs() < 1e-15);
        let (_, j) = m.apply_with_jacobian([0.5, 0.25]);
        assert!((j[0][0] - 1.32).abs() < 1e-15 && j[0][1] == 0.0);
    }

    #[test]
    fn budget_violation_is_reported() {
        let d = Domain::disk([0.0, 0.0], 1.0).unwrap();
        let r = compose_maps(&[PerturbationField::dilation(0.5)], Some(&[0.25]), &d);
        assert!(matches!(r, Err(Error::BudgetExceeded { step: 1, .. })));
    }
}
