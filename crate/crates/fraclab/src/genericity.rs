//! The simplicity loop: split the first multiple eigenvalue with a small perturbation of
//! the domain, the potential or the weight, and repeat until the first `q` eigenvalues
//! are simple.
//!
//! Step `l` is bounded by the budget `σ_l = ε 4^{-l}` (C¹ norm of the domain field, sup
//! norm of the potential or weight increment), so the accumulated perturbation stays below
//! `ε/3`. Simplicity is certified by disjoint intervals
//! `U_k = [λ_k - r_k, λ_k + r_k]`, `r_k = 0.45 · (distance to the nearest neighbor)`, each
//! holding exactly one eigenvalue.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::{
    assemble_potential, assemble_weight, transformed_form, Basis, DiscreteOperator, ScalarField,
};
use crate::geometry::{apply_perturbation, CompositeMap, Domain, PerturbationField};
use crate::shape_calculus::{
    derivative_via_transformed_form, splitting_matrix_potential, splitting_matrix_weight, SplittingMatrix,
};
use crate::spectrum::{cluster, default_cluster_tolerance, solve, Cluster, Spectrum, GRID1D_CLUSTER_TOL};
use crate::{Error, Result};

/// Cluster tolerance of the loop on planar lattices.
pub const LOOP_GRID2D_TOL: f64 = 1e-3;
/// Half-width of a certified interval relative to the distance to the nearest neighbor.
pub const INTERVAL_FRACTION: f64 = 0.45;

/// What the loop perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Domain,
    Potential,
    Weight,
}

/// Parameters of the loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplificationPlan {
    pub mode: Mode,
    /// Number of leading eigenvalues to make simple.
    pub q: usize,
    /// Budget scale `ε`.
    pub epsilon: f64,
    pub cluster_tol: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// Highest Fourier mode among the boundary-normal candidates.
    pub fourier_modes: usize,
}

impl SimplificationPlan {
    /// Defaults for `op`: `ε = 0.1`, 20 iterations, 12 halvings, modes up to 6.
    pub fn new(mode: Mode, q: usize, op: &DiscreteOperator) -> Self {
        let cluster_tol = match &op.basis {
            Basis::Grid { grid, .. } if grid.dim == 2 => LOOP_GRID2D_TOL,
            Basis::Grid { .. } => GRID1D_CLUSTER_TOL,
            Basis::Spectral1d(_) => default_cluster_tolerance(op),
        };
        SimplificationPlan {
            mode,
            q,
            epsilon: 0.1,
            cluster_tol,
            max_iterations: 20,
            max_halvings: 12,
            fourier_modes: 6,
        }
    }

    /// `σ_l = ε 4^{-l}`, `l ≥ 1`.
    pub fn budget(&self, l: usize) -> f64 {
        self.epsilon * 0.25f64.powi(l as i32)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: &str| {
            Err(Error::Config { field: field.into(), message: message.into() })
        };
        if self.q == 0 {
            return bad("q", "must be positive");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon", "must lie in (0, 1)");
        }
        if !(self.cluster_tol > 0.0) {
            return bad("cluster_tol", "must be positive");
        }
        Ok(())
    }
}

/// Starting point of the loop: the unperturbed operator and its domain.
#[derive(Debug, Clone)]
pub struct SimplificationContext {
    pub base: DiscreteOperator,
    pub domain: Domain,
}

/// A perturbation applied by one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    Field { field: PerturbationField },
    Scalar { field: ScalarField },
}

/// A dictionary element with its label.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub label: String,
    pub perturbation: Perturbation,
    /// Size of the unit-amplitude element (C¹ or sup norm).
    pub norm: f64,
}

/// Record of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cluster: Cluster,
    pub candidate: String,
    /// The applied perturbation (amplitude included).
    pub perturbation: Perturbation,
    pub amplitude: f64,
    pub budget: f64,
    pub halvings: usize,
    pub deviation: f64,
    pub predicted_slopes: Vec<f64>,
    pub before: Vec<f64>,
    pub after: Vec<f64>,
    pub intervals: Vec<(f64, f64)>,
}

/// Outcome of [`simplify`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplificationReport {
    pub mode: Mode,
    pub q: usize,
    pub cluster_tol: f64,
    pub iterations: Vec<IterationRecord>,
    pub eigenvalues: Vec<f64>,
    /// Certified disjoint intervals around the first `q` eigenvalues.
    pub intervals: Vec<(f64, f64)>,
    pub min_relative_gap: f64,
    /// Sum of the applied step sizes (C¹ norms in domain mode, sup norms otherwise).
    pub total_norm: f64,
    /// Sum of the budgets used.
    pub budget_sum: f64,
    /// Bound on `‖𝓕 - I‖_{C¹}` for the composite map (domain mode).
    pub map_distance_bound: f64,
    pub final_domain: Option<Domain>,
    pub final_map: Option<CompositeMap>,
    pub final_potential: Option<ScalarField>,
    pub final_weight: Option<ScalarField>,
}

/// Certified intervals around the first `q` eigenvalues, or `None` if some of them are not
/// separated by more than `tol` (relative).
pub fn certify(values: &[f64], q: usize, tol: f64) -> Option<Vec<(f64, f64)>> {
    if values.len() < q + 1 {
        return None;
    }
    let mut out = Vec::with_capacity(q);
    for k in 0..q {
        let mut gap = f64::INFINITY;
        if k > 0 {
            gap = gap.min(values[k] - values[k - 1]);
        }
        gap = gap.min(values[k + 1] - values[k]);
        if k + 1 < q && (values[k + 1] - values[k]) <= tol * values[k + 1].abs() {
            return None;
        }
        if k > 0 && (values[k] - values[k - 1]) <= tol * values[k].abs() {
            return None;
        }
        let r = INTERVAL_FRACTION * gap;
        out.push((values[k] - r, values[k] + r));
    }
    Some(out)
}

/// Intervals around the simple eigenvalues among the first `q` (by index).
fn simple_intervals(values: &[f64], clusters: &[Cluster], q: usize) -> Vec<(usize, (f64, f64))> {
    clusters
        .iter()
        .filter(|c| c.is_simple() && c.start < q)
        .map(|c| {
            let k = c.start;
            let mut gap = f64::INFINITY;
            if k > 0 {
                gap = gap.min(values[k] - values[k - 1]);
            }
            if k + 1 < values.len() {
                gap = gap.min(values[k + 1] - values[k]);
            }
            let r = INTERVAL_FRACTION * gap;
            (k, (values[k] - r, values[k] + r))
        })
        .collect()
}

/// Loop state: the current operator and the accumulated perturbation.
#[derive(Debug, Clone)]
struct State {
    op: DiscreteOperator,
    domain: Domain,
    map: CompositeMap,
    potential: Option<ScalarField>,
    weight: Option<ScalarField>,
}

impl State {
    fn apply(&self, base: &DiscreteOperator, p: &Perturbation, mode: Mode) -> Result<State> {
        let mut next = self.clone();
        match (mode, p) {
            (Mode::Domain, Perturbation::Field { field }) => {
                next.map = self.map.then(field.clone(), &self.domain);
                next.domain = apply_perturbation(&self.domain, field)?;
                next.op = transformed_form(base, &next.map)?;
            }
            (Mode::Potential, Perturbation::Scalar { field }) => {
                let a = match &self.potential {
                    None => field.clone(),
                    Some(a) => a.sum(field, base)?,
                };
                next.op = assemble_potential(base, &a)?;
                next.potential = Some(a);
            }
            (Mode::Weight, Perturbation::Scalar { field }) => {
                let w = match &self.weight {
                    None => ScalarField::constant(1.0).sum(field, base)?,
                    Some(w) => w.sum(field, base)?,
                };
                next.op = assemble_weight(base, &w)?;
                next.weight = Some(w);
            }
            _ => return Err(Error::InvalidArgument("perturbation does not match the mode".into())),
        }
        Ok(next)
    }
}

fn scaled(p: &Perturbation, t: f64) -> Perturbation {
    match p {
        Perturbation::Field { field } => Perturbation::Field { field: field.with_amplitude(field.amplitude * t) },
        Perturbation::Scalar { field } => Perturbation::Scalar { field: field.scaled(t) },
    }
}

/// The candidate dictionary for `mode`, each element normalized to unit size.
pub fn dictionary(mode: Mode, plan: &SimplificationPlan, cl: &Cluster, spec: &Spectrum, domain: &Domain) -> Result<Vec<Candidate>> {
    let op = &spec.operator;
    let mut out = Vec::new();
    match mode {
        Mode::Domain => {
            let mut fields = Vec::new();
            if domain.dim() == 2 {
                for k in 1..=plan.fourier_modes {
                    fields.push((format!("normal cos {k}θ"), PerturbationField::normal_mode(domain, k, false, 1.0)));
                    fields.push((format!("normal sin {k}θ"), PerturbationField::normal_mode(domain, k, true, 1.0)));
                }
                let c = domain.center();
                let shift = |a: [[f64; 2]; 2]| [-(a[0][0] * c[0] + a[0][1] * c[1]), -(a[1][0] * c[0] + a[1][1] * c[1])];
                for (label, a) in [
                    ("affine stretch", [[1.0, 0.0], [0.0, -1.0]]),
                    ("affine shear", [[0.0, 1.0], [1.0, 0.0]]),
                ] {
                    fields.push((label.to_string(), PerturbationField::affine(shift(a), a, 1.0)));
                }
            } else {
                let c = domain.center()[0];
                fields.push(("affine stretch".to_string(), PerturbationField::affine([-c, 0.0], [[1.0, 0.0], [0.0, 0.0]], 1.0)));
            }
            for (label, f) in fields {
                let norm = f.c1_norm_bound(domain);
                let unit = f.with_amplitude(1.0 / norm);
                out.push(Candidate { label, perturbation: Perturbation::Field { field: unit }, norm: 1.0 });
            }
        }
        Mode::Potential | Mode::Weight => {
            let c = domain.center();
            let mut fields: Vec<(String, ScalarField)> = Vec::new();
            let monomials: &[(u32, u32, &str)] = if domain.dim() == 2 {
                &[(1, 0, "x"), (0, 1, "y"), (2, 0, "x²"), (1, 1, "xy"), (0, 2, "y²")]
            } else {
                &[(1, 0, "x"), (2, 0, "x²")]
            };
            for &(i, j, name) in monomials {
                // centered monomial (x - c_x)^i (y - c_y)^j, expanded
                let mut terms = Vec::new();
                for a in 0..=i {
                    for b in 0..=j {
                        let coef = binom(i, a) * binom(j, b) * (-c[0]).powi((i - a) as i32) * (-c[1]).powi((j - b) as i32);
                        if coef != 0.0 {
                            terms.push((a, b, coef));
                        }
                    }
                }
                fields.push((name.to_string(), ScalarField::Polynomial { terms }));
            }
            if matches!(op.basis, Basis::Grid { .. }) {
                for i in cl.indices() {
                    for j in i..=cl.end {
                        let (vi, vj) = (spec.vector(i), spec.vector(j));
                        let values = vi.iter().zip(vj.iter()).map(|(a, b)| a * b).collect();
                        fields.push((format!("product φ{}φ{}", i + 1, j + 1), ScalarField::Nodal { values }));
                    }
                }
            }
            for (label, f) in fields {
                let norm = f.sup_norm(op)?;
                if norm > 0.0 {
                    out.push(Candidate { label, perturbation: Perturbation::Scalar { field: f.scaled(1.0 / norm) }, norm: 1.0 });
                }
            }
        }
    }
    Ok(out)
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, m| acc * (n - m) as f64 / (m + 1) as f64)
}

fn splitting(mode: Mode, cl: &Cluster, spec: &Spectrum, p: &Perturbation) -> Result<SplittingMatrix> {
    match (mode, p) {
        (Mode::Domain, Perturbation::Field { field }) => derivative_via_transformed_form(cl, spec, field),
        (Mode::Potential, Perturbation::Scalar { field }) => splitting_matrix_potential(cl, spec, field),
        (Mode::Weight, Perturbation::Scalar { field }) => splitting_matrix_weight(cl, spec, field),
        _ => Err(Error::InvalidArgument("perturbation does not match the mode".into())),
    }
}

/// Dictionary element maximizing `deviation(M)/size`. Domain-mode matrices come from the
/// volumetric route.
pub fn select_perturbation(
    cl: &Cluster,
    spec: &Spectrum,
    plan: &SimplificationPlan,
    domain: &Domain,
) -> Result<(Candidate, SplittingMatrix)> {
    if cl.is_simple() {
        return Err(Error::InvalidArgument("cluster is simple".into()));
    }
    let cands = dictionary(plan.mode, plan, cl, spec, domain)?;
    let scored: Vec<(Candidate, SplittingMatrix)> = cands
        .into_par_iter()
        .map(|c| splitting(plan.mode, cl, spec, &c.perturbation).map(|m| (c, m)))
        .collect::<Result<_>>()?;
    let scale = cl.representative.abs().max(1.0);
    let best = scored
        .into_iter()
        .max_by(|a, b| (a.1.deviation / a.0.norm).total_cmp(&(b.1.deviation / b.0.norm)))
        .ok_or(Error::NoSplittingCandidate(0.0))?;
    let score = best.1.deviation / best.0.norm;
    if score > 1e-10 * scale {
        Ok(best)
    } else {
        Err(Error::NoSplittingCandidate(score))
    }
}

/// Outcome of [`amplitude_search`].
#[derive(Debug, Clone)]
pub struct AmplitudeStep {
    pub amplitude: f64,
    pub halvings: usize,
    pub spectrum: Spectrum,
}

/// Largest `t = σ 2^{-j}`, `j ≤ max_halvings`, for which the attacked cluster loses
/// multiplicity and each interval in `keep` still holds exactly its own eigenvalue.
fn amplitude_search_state(
    base: &DiscreteOperator,
    state: &State,
    cand: &Candidate,
    cl: &Cluster,
    keep: &[(usize, (f64, f64))],
    budget: f64,
    plan: &SimplificationPlan,
) -> Result<(AmplitudeStep, State)> {
    let count = (plan.q + 2).max(cl.end + 3);
    let mut t = budget / cand.norm;
    for j in 0..=plan.max_halvings {
        let next = state.apply(base, &scaled(&cand.perturbation, t), plan.mode);
        if let Ok(next) = next {
            let spec = solve(&next.op, count.min(next.op.size()))?;
            let v = &spec.eigenvalues;
            let opened = cl.start..cl.end;
            let split = opened.clone().any(|k| (v[k + 1] - v[k]) > plan.cluster_tol * v[k + 1].abs());
            let all_open = opened.clone().all(|k| (v[k + 1] - v[k]) > plan.cluster_tol * v[k + 1].abs());
            let held = keep.iter().all(|&(k, (lo, hi))| {
                v.iter().filter(|&&x| x >= lo && x <= hi).count() == 1 && v[k] >= lo && v[k] <= hi
            });
            if (all_open || (cl.len() > 2 && split)) && held {
                return Ok((AmplitudeStep { amplitude: t, halvings: j, spectrum: spec }, next));
            }
        }
        t *= 0.5;
    }
    Err(Error::AmplitudeExhausted(plan.max_halvings))
}

/// Public form of the amplitude search for a single step from `context`.
pub fn amplitude_search(
    cand: &Candidate,
    cl: &Cluster,
    spec: &Spectrum,
    plan: &SimplificationPlan,
    context: &SimplificationContext,
    budget: f64,
) -> Result<AmplitudeStep> {
    let state = initial_state(context);
    let clusters = cluster(spec, plan.cluster_tol);
    let keep: Vec<_> = simple_intervals(&spec.eigenvalues, &clusters, plan.q);
    amplitude_search_state(&context.base, &state, cand, cl, &keep, budget, plan).map(|r| r.0)
}

fn initial_state(context: &SimplificationContext) -> State {
    State {
        op: context.base.clone(),
        domain: context.domain.clone(),
        map: CompositeMap::identity(),
        potential: context.base.potential.clone(),
        weight: context.base.weight.clone(),
    }
}

/// Runs the loop without logging.
pub fn simplify(context: &SimplificationContext, plan: &SimplificationPlan) -> Result<SimplificationReport> {
    simplify_with_log(context, plan, |_| {})
}

/// Runs the loop, sending one line per event to `log`.
pub fn simplify_with_log(
    context: &SimplificationContext,
    plan: &SimplificationPlan,
    mut log: impl FnMut(&str),
) -> Result<SimplificationReport> {
    plan.validate()?;
    let base = &context.base;
    if plan.q + 1 > base.size() {
        return Err(Error::InvalidArgument(format!("q = {} needs more than {} unknowns", plan.q, base.size())));
    }
    let mut state = initial_state(context);
    let count = plan.q + 2;
    let mut spec = solve(&state.op, count)?;
    let mut records = Vec::new();
    let mut total_norm = 0.0;
    let mut budget_sum = 0.0;
    for l in 1..=plan.max_iterations + 1 {
        let clusters = cluster(&spec, plan.cluster_tol);
        if let Some(intervals) = certify(&spec.eigenvalues, plan.q, plan.cluster_tol) {
            log(&format!("certified after {} iterations", l - 1));
            return Ok(SimplificationReport {
                mode: plan.mode,
                q: plan.q,
                cluster_tol: plan.cluster_tol,
                iterations: records,
                eigenvalues: spec.eigenvalues.iter().take(plan.q).copied().collect(),
                intervals,
                min_relative_gap: spec.min_relative_gap(plan.q),
                total_norm,
                budget_sum,
                map_distance_bound: state.map.distance_bound(),
                final_domain: (plan.mode == Mode::Domain).then(|| state.domain.clone()),
                final_map: (plan.mode == Mode::Domain).then(|| state.map.clone()),
                final_potential: state.potential.clone(),
                final_weight: state.weight.clone(),
            });
        }
        if l > plan.max_iterations {
            break;
        }
        let target = clusters
            .iter()
            .find(|c| !c.is_simple() && c.start < plan.q)
            .cloned()
            .ok_or(Error::MaxIterations(l))?;
        if matches!(spec.operator.basis, Basis::Spectral1d(_)) && plan.mode == Mode::Domain {
            return Err(Error::Unsupported("domain steps on the weighted spectral basis".into()));
        }
        let (cand, m) = select_perturbation(&target, &spec, plan, &state.domain)?;
        let keep = simple_intervals(&spec.eigenvalues, &clusters, plan.q);
        let budget = plan.budget(l);
        log(&format!(
            "iteration {l}: cluster {}..={} at {:.6}, candidate {}, deviation {:.3e}, budget {:.3e}",
            target.start + 1,
            target.end + 1,
            target.representative,
            cand.label,
            m.deviation,
            budget
        ));
        let (step, next) = amplitude_search_state(base, &state, &cand, &target, &keep, budget, plan)?;
        let applied = scaled(&cand.perturbation, step.amplitude);
        let size = match &applied {
            Perturbation::Field { field } => field.c1_norm_bound(&state.domain),
            Perturbation::Scalar { field } => field.sup_norm(&state.op)?,
        };
        if size > budget * (1.0 + 1e-9) {
            return Err(Error::BudgetExceeded { step: l, norm: size, budget });
        }
        total_norm += size;
        budget_sum += budget;
        log(&format!(
            "  amplitude {:.3e} after {} halvings; eigenvalues {:?}",
            step.amplitude,
            step.halvings,
            step.spectrum.eigenvalues.iter().take(plan.q).map(|v| (v * 1e6).round() / 1e6).collect::<Vec<_>>()
        ));
        records.push(IterationRecord {
            iteration: l,
            cluster: target,
            candidate: cand.label.clone(),
            perturbation: applied,
            amplitude: step.amplitude,
            budget,
            halvings: step.halvings,
            deviation: m.deviation,
            predicted_slopes: m.eigenvalues.clone(),
            before: spec.eigenvalues.clone(),
            after: step.spectrum.eigenvalues.clone(),
            intervals: keep.iter().map(|k| k.1).collect(),
        });
        state = next;
        spec = step.spectrum;
    }
    Err(Error::MaxIterations(plan.max_iterations))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budgets_decrease_geometrically() {
        let op = crate::discretization::assemble_1d_spectral(0.5, 8, &Domain::interval(-1.0, 1.0).unwrap()).unwrap();
        let plan = SimplificationPlan::new(Mode::Domain, 3, &op);
        let total: f64 = (1..60).map(|l| plan.budget(l)).sum();
        assert!(total <= plan.epsilon / 3.0 + 1e-15);
        for l in 1..10 {
            assert!((plan.budget(l + 1) / plan.budget(l) - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn certify_rejects_close_pairs() {
        assert!(certify(&[1.0, 2.0, 2.0001, 3.0], 3, 1e-3).is_none());
        let iv = certify(&[1.0, 2.0, 3.0, 5.0], 3, 1e-3).unwrap();
        assert_eq!(iv.len(), 3);
        for w in iv.windows(2) {
            assert!(w[0].1 < w[1].0);
        }
    }
}
