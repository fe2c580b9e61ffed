//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.

use std::sync::OnceLock;

use fraclab::discretization::{
    assemble_1d_grid, assemble_1d_spectral, assemble_2d_grid, assemble_derivative_kernel, assemble_potential,
    assemble_transformed_form, ScalarField,
};
use fraclab::genericity::{simplify, Mode, SimplificationContext, SimplificationPlan};
use fraclab::geometry::{Domain, PerturbationField};
use fraclab::shape_calculus::{
    derivative_via_transformed_form, pohozaev_residual, splitting_matrix_domain, splitting_matrix_potential,
    tracked_slopes,
};
use fraclab::spectrum::{cluster, solve, Cluster, Spectrum, GRID2D_CLUSTER_TOL, SPECTRAL_CLUSTER_TOL};
use nalgebra::DMatrix;

fn report(id: u32, name: &str, ok: bool, detail: String) {
    println!("criterion {id} {}: {name} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {id} failed: {detail}");
}

fn interval() -> Domain {
    Domain::interval(-1.0, 1.0).unwrap()
}

fn disk() -> Domain {
    Domain::disk([0.0, 0.0], 1.0).unwrap()
}

/// Disk, `s = 1/2`, `h = 1/16`, first eight eigenpairs.
fn disk_spectrum() -> &'static Spectrum {
    static SPEC: OnceLock<Spectrum> = OnceLock::new();
    SPEC.get_or_init(|| {
        let op = assemble_2d_grid(0.5, 1.0 / 16.0, &disk()).unwrap();
        solve(&op, 8).unwrap()
    })
}

/// The cluster `{λ₂, λ₃}` of the disk.
fn disk_pair() -> Cluster {
    let pair = cluster(disk_spectrum(), GRID2D_CLUSTER_TOL).into_iter().find(|c| c.start == 1).unwrap();
    assert_eq!(pair.len(), 2);
    pair
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn criterion_1_pohozaev_identity_spectral() {
    let bq = interval().boundary_quadrature(2);
    let mut worst = 0.0f64;
    for s in [0.25, 0.5, 0.75] {
        let spec = solve(&assemble_1d_spectral(s, 64, &interval()).unwrap(), 5).unwrap();
        for k in 0..5 {
            worst = worst.max(pohozaev_residual(&spec, k, &bq).unwrap());
        }
    }
    report(1, "Pohozaev identity, interval, N=64", worst < 1e-3, format!("max relative residual {worst:.2e}"));
}

#[test]
fn criterion_2_interval_eigenvalues_are_simple() {
    let mut min_gap = f64::INFINITY;
    let mut worst_change = 0.0f64;
    for i in 1..=9 {
        let s = 0.1 * i as f64;
        let gaps = |n: usize| {
            let spec = solve(&assemble_1d_spectral(s, n, &interval()).unwrap(), 10).unwrap();
            spec.eigenvalues.windows(2).map(|w| (w[1] - w[0]) / w[1]).collect::<Vec<_>>()
        };
        let (g64, g128) = (gaps(64), gaps(128));
        for (a, b) in g64.iter().zip(&g128) {
            min_gap = min_gap.min(*a).min(*b);
            worst_change = worst_change.max(rel(*b, *a));
        }
    }
    report(
        2,
        "interval simplicity, s = 0.1..0.9, first 10",
        min_gap > 1e-3 && worst_change < 0.1,
        format!("min relative gap {min_gap:.3e}, max gap change {worst_change:.2e}"),
    );
}

#[test]
fn criterion_3_spectral_matches_extrapolated_grid() {
    let spec = solve(&assemble_1d_spectral(0.5, 64, &interval()).unwrap(), 5).unwrap();
    let levels: Vec<Vec<f64>> = [64.0, 128.0, 256.0]
        .iter()
        .map(|m| solve(&assemble_1d_grid(0.5, 1.0 / m, &interval()).unwrap(), 5).unwrap().eigenvalues)
        .collect();
    let mut worst = 0.0f64;
    let mut lambda1 = 0.0;
    for k in 0..5 {
        let (a, b, c) = (levels[0][k], levels[1][k], levels[2][k]);
        // Aitken extrapolation from three geometric levels
        let (d1, d2) = (b - a, c - b);
        let extrapolated = c - d2 * d2 / (d2 - d1);
        if k == 0 {
            lambda1 = extrapolated;
        }
        worst = worst.max(rel(spec.eigenvalues[k], extrapolated));
    }
    let ok = worst < 1e-2 && (spec.eigenvalues[0] - 1.1578).abs() < 1e-3 && (lambda1 - 1.1578).abs() < 1e-3;
    report(
        3,
        "spectral vs extrapolated grid, s=0.5",
        ok,
        format!("max relative difference {worst:.2e}, λ₁ spectral {:.6}, grid {lambda1:.6}", spec.eigenvalues[0]),
    );
}

fn closure_error(spec: &Spectrum, tol: f64, bq: &fraclab::geometry::BoundaryQuadrature) -> f64 {
    let s = spec.operator.order();
    let psi = PerturbationField::dilation(1.0);
    let mut worst = 0.0f64;
    for cl in cluster(spec, tol).iter().filter(|c| c.end < 5) {
        let m = splitting_matrix_domain(cl, spec, &psi, bq).unwrap();
        let target = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            cl.len(),
            cl.indices().map(|k| -2.0 * s * spec.eigenvalues[k]),
        ));
        worst = worst.max((&m.matrix - &target).norm() / target.norm());
    }
    worst
}

#[test]
fn criterion_4_dilation_closure() {
    let bq = interval().boundary_quadrature(2);
    let mut interval_err = 0.0f64;
    for s in [0.25, 0.5, 0.75] {
        let spec = solve(&assemble_1d_spectral(s, 64, &interval()).unwrap(), 5).unwrap();
        interval_err = interval_err.max(closure_error(&spec, SPECTRAL_CLUSTER_TOL, &bq));
    }
    let disk_err = closure_error(disk_spectrum(), GRID2D_CLUSTER_TOL, &disk().boundary_quadrature(256));
    report(
        4,
        "dilation closure M = -2sλI",
        interval_err < 1e-3 && disk_err < 0.1,
        format!("interval {interval_err:.2e}, disk {disk_err:.2e}"),
    );
}

#[test]
fn criterion_5_hadamard_against_tracking() {
    let spec = disk_spectrum();
    let pair = disk_pair();
    let psi = PerturbationField::normal_mode(&disk(), 2, false, 1.0);
    let boundary = splitting_matrix_domain(&pair, spec, &psi, &disk().boundary_quadrature(256)).unwrap();
    let volumetric = derivative_via_transformed_form(&pair, spec, &psi).unwrap();
    let base = spec.operator.clone();
    let family = move |t: f64| assemble_transformed_form(&base, &psi.with_amplitude(t));
    let tracked = tracked_slopes(&family, &pair, 0.01).unwrap();
    let mut vs_tracked = 0.0f64;
    let mut vs_volumetric = 0.0f64;
    for j in 0..2 {
        vs_tracked = vs_tracked.max(rel(boundary.eigenvalues[j], tracked[j]));
        vs_volumetric = vs_volumetric.max(rel(volumetric.eigenvalues[j], boundary.eigenvalues[j]));
    }
    report(
        5,
        "cos 2θ on the disk pair",
        vs_tracked < 0.25 && vs_volumetric < 0.25,
        format!(
            "boundary {:?}, tracked {:?}, volumetric {:?}; errors {vs_tracked:.2e}, {vs_volumetric:.2e}",
            boundary.eigenvalues, tracked, volumetric.eigenvalues
        ),
    );
}

#[test]
fn criterion_6_derivative_kernel_matches_differences() {
    let fields = [
        PerturbationField::dilation(1.0),
        PerturbationField::affine([0.1, 0.0], [[0.5, 0.0], [0.0, 0.0]], 1.0),
        PerturbationField::bump_1d(0.0, 1.2, vec![1.0], 1.0),
        PerturbationField::bump_1d(0.3, 1.0, vec![0.2, 0.5, -0.3], 1.0),
        PerturbationField::bump_1d(-0.2, 1.1, vec![0.0, 1.0, 0.0, 0.5], 1.0),
    ];
    let tau = 1e-3;
    let mut worst = 0.0f64;
    for s in [0.3, 0.7] {
        let base = assemble_1d_grid(s, 1.0 / 32.0, &interval()).unwrap();
        for f in &fields {
            let k = assemble_derivative_kernel(&base, f).unwrap();
            let a = |t: f64| assemble_transformed_form(&base, &f.with_amplitude(t)).unwrap().stiffness;
            let d1 = (a(tau) - a(-tau)) / (2.0 * tau);
            let d2 = (a(2.0 * tau) - a(-2.0 * tau)) / (4.0 * tau);
            let fd = (d1 * 4.0 - d2) / 3.0;
            for ((kv, fv), sv) in k.iter().zip(fd.iter()).zip(base.stiffness.iter()) {
                // entries at the rounding level of the differences are compared at that level
                let scale = kv.abs().max(1e-6 * sv.abs());
                worst = worst.max((kv - fv).abs() / scale);
            }
        }
    }
    report(6, "derivative kernel vs central differences", worst < 1e-5, format!("max entrywise error {worst:.2e}"));
}

#[test]
fn criterion_7_potential_splits_the_pair() {
    let spec = disk_spectrum();
    let pair = disk_pair();
    let (u, v) = (spec.vector(1), spec.vector(2));
    let b = ScalarField::Nodal { values: u.iter().zip(v.iter()).map(|(a, b)| a * b).collect() };
    let m = splitting_matrix_potential(&pair, spec, &b).unwrap();
    let sup = b.sup_norm(&spec.operator).unwrap();
    let t = 0.05 / sup;
    let perturbed = solve(&assemble_potential(&spec.operator, &b.scaled(t)).unwrap(), 3).unwrap();
    let gap = perturbed.eigenvalues[2] - perturbed.eigenvalues[1];
    let needed = 0.5 * t * m.spread();
    report(
        7,
        "potential φ₂φ₃ on the disk pair",
        m.matrix[(0, 1)] > 0.0 && gap >= needed,
        format!("M₁₂ = {:.4}, gap {gap:.4e} vs {needed:.4e}", m.matrix[(0, 1)]),
    );
}

#[test]
fn criterion_8_genericity_loop_on_the_disk() {
    let base = disk_spectrum().operator.as_ref().clone();
    let mut lines = Vec::new();
    let mut ok = true;
    for mode in [Mode::Domain, Mode::Potential, Mode::Weight] {
        let plan = SimplificationPlan::new(mode, 5, &base);
        let ctx = SimplificationContext { base: base.clone(), domain: disk() };
        match simplify(&ctx, &plan) {
            Ok(r) => {
                let disjoint = r.intervals.len() == 5 && r.intervals.windows(2).all(|w| w[0].1 < w[1].0);
                let contains = r.intervals.iter().zip(&r.eigenvalues).all(|(iv, l)| iv.0 < *l && *l < iv.1);
                let geometric = plan.epsilon * 4.0 / 3.0;
                let budget = mode != Mode::Domain || (r.total_norm <= r.budget_sum + 1e-12 && r.budget_sum <= geometric);
                ok &= disjoint && contains && budget;
                lines.push(format!(
                    "{mode:?}: {} iterations, min gap {:.2e}, norm {:.3e}",
                    r.iterations.len(),
                    r.min_relative_gap,
                    r.total_norm
                ));
            }
            Err(e) => {
                ok = false;
                lines.push(format!("{mode:?}: {e}"));
            }
        }
    }
    report(8, "simplicity loop, disk, q=5", ok, lines.join("; "));
}

#[test]
fn criterion_9_invariances() {
    // scaling
    let mut spectral = 0.0f64;
    for s in [0.25, 0.5, 0.75] {
        let a = solve(&assemble_1d_spectral(s, 64, &interval()).unwrap(), 5).unwrap();
        let b = solve(&assemble_1d_spectral(s, 64, &interval().scaled(2.0).unwrap()).unwrap(), 5).unwrap();
        for k in 0..5 {
            spectral = spectral.max(rel(b.eigenvalues[k], 2f64.powf(-2.0 * s) * a.eigenvalues[k]));
        }
    }
    let reference = solve(&assemble_1d_spectral(0.5, 64, &interval()).unwrap(), 3).unwrap();
    let g1 = solve(&assemble_1d_grid(0.5, 1.0 / 32.0, &interval()).unwrap(), 3).unwrap();
    let g2 = solve(&assemble_1d_grid(0.5, 1.0 / 32.0, &interval().scaled(2.0).unwrap()).unwrap(), 3).unwrap();
    let mut grid_ok = true;
    for k in 0..3 {
        let disc = (g1.eigenvalues[k] - reference.eigenvalues[k]).abs() * 0.5;
        grid_ok &= (g2.eigenvalues[k] - 0.5 * g1.eigenvalues[k]).abs() <= 2.0 * disc;
    }

    // remixing the pair basis
    let spec = disk_spectrum();
    let pair = disk_pair();
    let (c, s) = (0.7f64.cos(), 0.7f64.sin());
    let mut mixed = spec.clone();
    for r in 0..spec.eigenvectors.nrows() {
        let (u, v) = (spec.eigenvectors[(r, 1)], spec.eigenvectors[(r, 2)]);
        mixed.eigenvectors[(r, 1)] = c * u - s * v;
        mixed.eigenvectors[(r, 2)] = s * u + c * v;
    }
    let psi = PerturbationField::normal_mode(&disk(), 2, false, 1.0);
    let bq = disk().boundary_quadrature(256);
    let b = ScalarField::Polynomial { terms: vec![(2, 0, 1.0), (0, 1, 0.5)] };
    let mut remix = 0.0f64;
    for (x, y) in [
        (splitting_matrix_domain(&pair, spec, &psi, &bq).unwrap(), splitting_matrix_domain(&pair, &mixed, &psi, &bq).unwrap()),
        (derivative_via_transformed_form(&pair, spec, &psi).unwrap(), derivative_via_transformed_form(&pair, &mixed, &psi).unwrap()),
        (splitting_matrix_potential(&pair, spec, &b).unwrap(), splitting_matrix_potential(&pair, &mixed, &b).unwrap()),
    ] {
        for (p, q) in x.eigenvalues.iter().zip(&y.eigenvalues) {
            remix = remix.max((p - q).abs());
        }
    }

    // translation of the symmetric interval
    let mut translation = 0.0f64;
    let bq1 = interval().boundary_quadrature(2);
    let shift = PerturbationField::translation([1.0, 0.0], 1.0);
    for s in [0.25, 0.5, 0.75] {
        let spec = solve(&assemble_1d_spectral(s, 64, &interval()).unwrap(), 5).unwrap();
        for cl in cluster(&spec, SPECTRAL_CLUSTER_TOL) {
            translation = translation.max(splitting_matrix_domain(&cl, &spec, &shift, &bq1).unwrap().matrix.amax());
        }
    }
    report(
        9,
        "scaling, remixing and translation invariance",
        spectral < 1e-8 && grid_ok && remix < 1e-8 && translation < 1e-8,
        format!("scaling {spectral:.2e} (grid within bound: {grid_ok}), remix {remix:.2e}, translation {translation:.2e}"),
    );
}
