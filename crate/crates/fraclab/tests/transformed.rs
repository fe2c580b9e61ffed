use fraclab::discretization::{assemble_1d_grid, assemble_2d_grid, assemble_transformed_form, DiscreteOperator};
use fraclab::geometry::{Domain, PerturbationField};
use fraclab::shape_calculus::derivative_via_transformed_form;
use fraclab::spectrum::{cluster, default_cluster_tolerance, solve};

fn bases() -> Vec<DiscreteOperator> {
    vec![
        assemble_1d_grid(0.3, 1.0 / 32.0, &Domain::interval(-1.0, 1.0).unwrap()).unwrap(),
        assemble_1d_grid(0.7, 1.0 / 32.0, &Domain::interval(-1.0, 1.0).unwrap()).unwrap(),
        assemble_2d_grid(0.5, 1.0 / 8.0, &Domain::disk([0.0, 0.0], 1.0).unwrap()).unwrap(),
    ]
}

#[test]
fn pulled_back_dilation_scales_eigenvalues_exactly() {
    for base in bases() {
        let s = base.order();
        let a = solve(&base, 4).unwrap();
        for t in [-0.2, 0.1, 0.3] {
            let b = solve(&assemble_transformed_form(&base, &PerturbationField::dilation(t)).unwrap(), 4).unwrap();
            for k in 0..4 {
                let expected = (1.0 + t).powf(-2.0 * s) * a.eigenvalues[k];
                assert!((b.eigenvalues[k] - expected).abs() < 1e-6 * expected, "s={s} t={t} k={k}");
            }
        }
    }
}

#[test]
fn volumetric_dilation_closure() {
    for base in bases() {
        let s = base.order();
        let spec = solve(&base, 5).unwrap();
        for cl in cluster(&spec, default_cluster_tolerance(&base)).iter().filter(|c| c.end < 4) {
            let m = derivative_via_transformed_form(cl, &spec, &PerturbationField::dilation(1.0)).unwrap();
            for (j, k) in cl.indices().enumerate() {
                let expected = -2.0 * s * spec.eigenvalues[k];
                assert!((m.eigenvalues[j] - expected).abs() < 1e-3 * expected.abs(), "s={s} k={k}");
            }
        }
    }
}

#[test]
fn zero_field_reproduces_the_base() {
    for base in bases() {
        let same = assemble_transformed_form(&base, &PerturbationField::zero()).unwrap();
        assert_eq!(same.stiffness, base.stiffness);
        assert_eq!(same.mass, base.mass);
    }
}
