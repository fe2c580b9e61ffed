use fraclab::discretization::{assemble_1d_grid, assemble_1d_spectral, assemble_2d_grid};
use fraclab::geometry::Domain;
use fraclab::spectrum::{cluster, solve, GRID2D_CLUSTER_TOL};
use nalgebra::DVector;

fn interval() -> Domain {
    Domain::interval(-1.0, 1.0).unwrap()
}

fn disk(r: f64) -> Domain {
    Domain::disk([0.0, 0.0], r).unwrap()
}

fn first(op: &fraclab::discretization::DiscreteOperator) -> f64 {
    solve(op, 1).unwrap().eigenvalues[0]
}

#[test]
fn indicator_has_positive_fractional_laplacian() {
    for s in [0.2, 0.5, 0.8] {
        let op = assemble_1d_grid(s, 1.0 / 32.0, &interval()).unwrap();
        let rows = &op.stiffness * DVector::from_element(op.size(), 1.0);
        assert!(rows.iter().all(|v| *v > 0.0), "s={s}");
    }
    let op = assemble_2d_grid(0.5, 1.0 / 8.0, &disk(1.0)).unwrap();
    let rows = &op.stiffness * DVector::from_element(op.size(), 1.0);
    assert!(rows.iter().all(|v| *v > 0.0));
}

#[test]
fn interval_grid_agrees_with_spectral() {
    let spectral = first(&assemble_1d_spectral(0.5, 64, &interval()).unwrap());
    let grid = first(&assemble_1d_grid(0.5, 1.0 / 64.0, &interval()).unwrap());
    assert!((grid - spectral).abs() < 1e-2 * spectral);
}

#[test]
fn interval_refinement_changes_shrink() {
    let l: Vec<f64> = [16.0, 32.0, 64.0, 128.0]
        .iter()
        .map(|m| first(&assemble_1d_grid(0.9, 1.0 / m, &interval()).unwrap()))
        .collect();
    let changes: Vec<f64> = l.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    assert!(changes.windows(2).all(|c| c[1] < c[0]), "{l:?}");
}

#[test]
fn disk_first_eigenvalue_decreases_under_dyadic_refinement() {
    let l: Vec<f64> = [4.0, 8.0, 16.0].iter().map(|m| first(&assemble_2d_grid(0.5, 1.0 / m, &disk(1.0)).unwrap())).collect();
    assert!(l.windows(2).all(|w| w[1] < w[0]), "{l:?}");
    assert!(l[2] > 2.0, "{l:?}");
}

#[test]
fn disk_pair_and_scaling() {
    let unit = solve(&assemble_2d_grid(0.5, 1.0 / 16.0, &disk(1.0)).unwrap(), 3).unwrap();
    let pair = cluster(&unit, GRID2D_CLUSTER_TOL).into_iter().find(|c| c.start == 1).unwrap();
    assert_eq!(pair.indices(), 1..=2);

    let coarse = first(&assemble_2d_grid(0.5, 1.0 / 8.0, &disk(1.0)).unwrap());
    let big = first(&assemble_2d_grid(0.5, 1.0 / 8.0, &disk(2.0)).unwrap());
    // reference value of λ₁ on the unit disk for s = 1/2
    let error = (coarse - 2.00612).abs();
    assert!((big - 0.5 * coarse).abs() <= 2.0 * 0.5 * error, "{big} vs {coarse}");
}
