use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;

use spencer_core::hypercomplex::{
    conjugated_flat, conjugated_identity, hyper_potential_residual, j_hyperholo_residual, k_hyperholo_residual,
    k_translation_consistency, matrix_condition_residual, qmul, twistor_matrix, QuaternionFunction,
};
use spencer_core::structures::{twistor_structure, HypercomplexStructure};
use spencer_core::{DiffMode, Error, Patch, ScalarField};

const EXACT: DiffMode = DiffMode::Exact;

fn p4() -> Arc<Patch> {
    Arc::new(Patch::cube(4, -1.0, 1.0, 5).unwrap())
}

#[test]
fn quaternion_algebra() {
    let q = [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ];
    // ijk = -1
    assert_eq!(qmul(&qmul(&q[1], &q[2]), &q[3]), [-1.0, 0.0, 0.0, 0.0]);
    let (a, b) = ([0.5, -1.0, 2.0, 0.25], [1.5, 0.5, -0.5, 3.0]);
    let norm2 = |x: &[f64; 4]| x.iter().map(|v| v * v).sum::<f64>();
    assert!((norm2(&qmul(&a, &b)) - norm2(&a) * norm2(&b)).abs() < 1e-12);
}

#[test]
fn flat_examples() {
    let p = p4();
    let h = HypercomplexStructure::flat(&p).unwrap();
    let cases = [
        ("identity", QuaternionFunction::identity(&p).unwrap(), true),
        ("affine", QuaternionFunction::affine(&p, [0.3, -1.0, 2.0, 0.5], [1.0, 0.0, -2.0, 3.0]).unwrap(), true),
        ("conjugate", QuaternionFunction::conjugate(&p).unwrap(), false),
        ("square", QuaternionFunction::square(&p).unwrap(), false),
    ];
    for (name, f, good) in &cases {
        let j = j_hyperholo_residual(&h, f, EXACT).unwrap();
        let k = k_hyperholo_residual(&h, f, EXACT).unwrap();
        assert!(j.route_gap <= 1e-10 && k.route_gap <= 1e-10, "{name}");
        if *good {
            assert!(j.residual.sup_norm <= 1e-12 && k.residual.sup_norm <= 1e-12, "{name}");
        } else {
            assert!(j.residual.sup_norm > 0.5 && k.residual.sup_norm > 0.5, "{name}");
        }
    }
}

#[test]
fn twistor_identity() {
    let p = p4();
    let h = HypercomplexStructure::flat(&p).unwrap();
    let id = QuaternionFunction::identity(&p).unwrap();
    let (b, c, d) = (0.48, 0.6, 0.64);
    let acs = twistor_structure(&h, b, c, d).unwrap();
    let r = matrix_condition_residual(&acs, &id, &twistor_matrix(b, c, d), EXACT, "twistor").unwrap();
    assert!(r.sup_norm <= 1e-12);
    // a different point of the sphere does not match
    let r = matrix_condition_residual(&acs, &id, &twistor_matrix(0.0, 0.0, 1.0), EXACT, "twistor").unwrap();
    assert!(r.sup_norm > 0.1);
}

#[test]
fn k_translation() {
    let p = p4();
    let h = HypercomplexStructure::flat(&p).unwrap();
    let g = QuaternionFunction::affine(&p, [1.0, 2.0, -0.5, 0.3], [0.0, 1.0, 0.0, 0.0]).unwrap();
    let r = k_translation_consistency(&h, &g, EXACT, 1e-10).unwrap();
    assert!(r.passes && r.kappa == 1.0);
    assert!(r.g_holomorphic.sup_norm <= 1e-12 && r.psi_antiholomorphic.sup_norm <= 1e-12);
    let sq = QuaternionFunction::square(&p).unwrap();
    assert!(matches!(k_translation_consistency(&h, &sq, EXACT, 1e-10), Err(Error::Precondition(_))));
}

#[test]
fn hyper_potential() {
    let p = p4();
    let h = HypercomplexStructure::flat(&p).unwrap();
    let field = |s: &str| ScalarField::parse(&p, s).unwrap();
    let r = hyper_potential_residual(&h, &field("x1^2 - x2^2"), &field("x1^2 - x3^2"), EXACT).unwrap();
    assert!(r.coupled.sup_norm <= 1e-12 && r.j_part.sup_norm <= 1e-12 && r.k_part.sup_norm <= 1e-12);
    assert!(r.delta_j_u <= 1e-10 && r.delta_k_zeta <= 1e-10);
    // u = x1²: d(J*du) = -2 dx1∧dx2 and Δ_J u = 2·2
    let r = hyper_potential_residual(&h, &field("x1^2"), &field("0"), EXACT).unwrap();
    assert!((r.coupled.sup_norm - 2.0).abs() < 1e-12 && r.k_part.sup_norm == 0.0);
    assert!((r.delta_j_u - 4.0).abs() < 1e-10);
}

fn well_conditioned(v: &[f64]) -> Option<DMatrix<f64>> {
    let g = DMatrix::from_row_slice(4, 4, v) + DMatrix::identity(4, 4) * 2.0;
    let sv = g.clone().svd(false, false).singular_values;
    (sv.min() > 0.3).then_some(g)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conjugated_identity_is_hyperholomorphic(v in prop::collection::vec(-1.0f64..1.0, 16)) {
        let g = well_conditioned(&v);
        prop_assume!(g.is_some());
        let g = g.unwrap();
        let p = p4();
        let h = conjugated_flat(&p, &g).unwrap();
        let f = conjugated_identity(&p, &g).unwrap();
        let j = j_hyperholo_residual(&h, &f, EXACT).unwrap();
        let k = k_hyperholo_residual(&h, &f, EXACT).unwrap();
        prop_assert!(j.residual.sup_norm <= 1e-10 && k.residual.sup_norm <= 1e-10);
        prop_assert!(j.route_gap <= 1e-10 && k.route_gap <= 1e-10);
    }

    #[test]
    fn left_affine_maps_are_hyperholomorphic(a in prop::array::uniform4(-2.0f64..2.0), b in prop::array::uniform4(-2.0f64..2.0)) {
        let p = p4();
        let h = HypercomplexStructure::flat(&p).unwrap();
        let f = QuaternionFunction::affine(&p, a, b).unwrap();
        prop_assert!(j_hyperholo_residual(&h, &f, EXACT).unwrap().residual.sup_norm <= 1e-10);
        prop_assert!(k_hyperholo_residual(&h, &f, EXACT).unwrap().residual.sup_norm <= 1e-10);
    }
}
