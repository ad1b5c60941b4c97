use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spencer_core::fixtures::type1_structure;
use spencer_core::hypercomplex::QuaternionFunction;
use spencer_core::spencer::{
    affine_transition_check, hyper_spencer_pattern_check, independence_rank, superposition_check,
    transition_holomorphy_check, verify_chart, SpencerChart,
};
use spencer_core::structures::{AlmostComplexStructure, HypercomplexStructure};
use spencer_core::{parse_expr, ComplexField, DiffMode, Expr, Patch};

const EXACT: DiffMode = DiffMode::Exact;

fn p4() -> Arc<Patch> {
    Arc::new(Patch::cube(4, -1.0, 1.0, 5).unwrap())
}

fn cf(p: &Arc<Patch>, re: &str, im: &str) -> ComplexField {
    ComplexField::parse(p, re, im).unwrap()
}

fn h2(re: &str, im: &str) -> (Expr, Expr) {
    (parse_expr(re, 2).unwrap(), parse_expr(im, 2).unwrap())
}

#[test]
fn integrable_chart_has_full_pattern() {
    let p = p4();
    let acs = AlmostComplexStructure::standard(&p);
    let chart = SpencerChart::new(vec![cf(&p, "x1", "x2"), cf(&p, "x3", "x4")], vec![]).unwrap();
    let r = verify_chart(&acs, &chart, EXACT, 1e-8).unwrap();
    assert!(r.passes && r.max_residual() == 0.0);
    assert_eq!(r.m, 2);
}

#[test]
fn type1_chart() {
    let p = p4();
    let acs = type1_structure(&p).unwrap();
    let (z, w) = (cf(&p, "x1", "x2"), cf(&p, "x3", "x4"));
    let good = verify_chart(&acs, &SpencerChart::new(vec![z.clone()], vec![w.clone()]).unwrap(), EXACT, 1e-8).unwrap();
    assert!(good.passes && good.starred_max > 0.5);
    let bad = verify_chart(&acs, &SpencerChart::new(vec![z, w], vec![]).unwrap(), EXACT, 1e-8).unwrap();
    assert!(!bad.passes);
    // the failure does not shrink with the grid
    let finer = Arc::new(Patch::cube(4, -1.0, 1.0, 9).unwrap());
    let acs = type1_structure(&finer).unwrap();
    let chart = SpencerChart::new(vec![cf(&finer, "x1", "x2"), cf(&finer, "x3", "x4")], vec![]).unwrap();
    let r = verify_chart(&acs, &chart, EXACT, 1e-8).unwrap();
    assert!((r.max_residual() - bad.max_residual()).abs() < 0.5 * bad.max_residual());
}

#[test]
fn rank_examples() {
    let p = p4();
    let (z1, z2) = (cf(&p, "x1", "x2"), cf(&p, "x3", "x4"));
    let sum = z1.add(&z2).unwrap();
    assert_eq!(independence_rank(&[z1.clone(), z2], EXACT).unwrap().min_rank, 2);
    assert_eq!(independence_rank(&[z1.clone(), sum], EXACT).unwrap().min_rank, 2);
    let r = independence_rank(&[z1.clone(), z1.mul(&z1).unwrap()], EXACT).unwrap();
    assert!(!r.independent && r.min_rank == 1);
}

#[test]
fn superposition_examples() {
    let p = p4();
    let acs = type1_structure(&p).unwrap();
    let (z, w) = (cf(&p, "x1", "x2"), cf(&p, "x3", "x4"));
    let chart = SpencerChart::new(vec![z.clone()], vec![w.clone()]).unwrap();
    let r = superposition_check(&acs, &chart, &z.mul(&z).unwrap(), EXACT, 1e-8, Some(2)).unwrap();
    assert!(r.passes && r.complement_coefficients.sup_norm <= 1e-10);
    let fit = r.fit.unwrap();
    for (mon, (re, im)) in fit.monomials.iter().zip(&fit.coefficients) {
        let want = if mon == &vec![2] { 1.0 } else { 0.0 };
        assert!((re - want).abs() < 1e-8 && im.abs() < 1e-8, "{mon:?}");
    }
    assert!(superposition_check(&acs, &chart, &z.add(&w).unwrap(), EXACT, 1e-8, None).is_err());

    let q = Arc::new(Patch::cube(2, -1.0, 1.0, 9).unwrap());
    let std = AlmostComplexStructure::standard(&q);
    let chart = SpencerChart::new(vec![cf(&q, "x1", "x2")], vec![]).unwrap();
    let ez = cf(&q, "exp(x1)*cos(x2)", "exp(x1)*sin(x2)");
    let r = superposition_check(&std, &chart, &ez, EXACT, 1e-10, None).unwrap();
    assert!(r.passes && r.complement_coefficients.sup_norm <= 1e-10);
}

#[test]
fn transition_examples() {
    let q = Arc::new(Patch::cube(2, 0.5, 1.5, 9).unwrap());
    let acs = AlmostComplexStructure::standard(&q);
    let a = SpencerChart::new(vec![cf(&q, "x1", "x2")], vec![]).unwrap();
    let b = SpencerChart::new(vec![cf(&q, "2*x1 + 1", "2*x2")], vec![]).unwrap();
    let r = transition_holomorphy_check(&acs, &a, &b, &[h2("2*x1 + 1", "2*x2")], EXACT, 1e-10).unwrap();
    assert!(r.passes && r.cauchy_riemann == 0.0 && r.consistency == 0.0);
    let b = SpencerChart::new(vec![cf(&q, "x1^2 - x2^2", "2*x1*x2")], vec![]).unwrap();
    let r = transition_holomorphy_check(&acs, &a, &b, &[h2("x1^2 - x2^2", "2*x1*x2")], EXACT, 1e-10).unwrap();
    assert!(r.passes);
    // a wrong closed form is caught by the consistency check
    let r = transition_holomorphy_check(&acs, &a, &b, &[h2("x1^2 + x2^2", "2*x1*x2")], EXACT, 1e-10).unwrap();
    assert!(!r.passes && r.cauchy_riemann > 0.1);
    let conj = SpencerChart::new(vec![cf(&q, "x1", "-x2")], vec![]).unwrap();
    assert!(transition_holomorphy_check(&acs, &a, &conj, &[h2("x1", "-x2")], EXACT, 1e-10).is_err());
}

#[test]
fn quaternionic_charts() {
    let p = p4();
    let h = HypercomplexStructure::flat(&p).unwrap();
    let id = QuaternionFunction::identity(&p).unwrap();
    let r = hyper_spencer_pattern_check(&h, &[id], &[], EXACT, 1e-10).unwrap();
    assert!(r.passes && r.m == 1);
    let g = QuaternionFunction::affine(&p, [0.3, -1.0, 2.0, 0.5], [1.0, 0.0, -2.0, 3.0]).unwrap();
    let r = affine_transition_check(&h, &g, EXACT, 1e-10).unwrap();
    assert!(r.hyperholomorphic && r.affine && r.affine_fit_residual <= 1e-10);
    let r = affine_transition_check(&h, &QuaternionFunction::square(&p).unwrap(), EXACT, 1e-10).unwrap();
    assert!(!r.hyperholomorphic && r.k_residual > 0.1 && !r.affine);
}

fn random_coeffs(rng: &mut ChaCha8Rng) -> [[(f64, f64); 2]; 2] {
    loop {
        let m: [[(f64, f64); 2]; 2] = std::array::from_fn(|_| std::array::from_fn(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
        // complex determinant away from 0
        let det_re = m[0][0].0 * m[1][1].0 - m[0][0].1 * m[1][1].1 - (m[0][1].0 * m[1][0].0 - m[0][1].1 * m[1][0].1);
        let det_im = m[0][0].0 * m[1][1].1 + m[0][0].1 * m[1][1].0 - (m[0][1].0 * m[1][0].1 + m[0][1].1 * m[1][0].0);
        if det_re.hypot(det_im) > 0.2 {
            return m;
        }
    }
}

fn recombine(m: &[[(f64, f64); 2]; 2], w: &[ComplexField]) -> Vec<ComplexField> {
    (0..2)
        .map(|i| {
            let a = w[0].scale(m[i][0].0, m[i][0].1).unwrap();
            a.add(&w[1].scale(m[i][1].0, m[i][1].1).unwrap()).unwrap()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rank_is_basis_independent(seed in any::<u64>(), dependent in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = p4();
        let z1 = cf(&p, "x1", "x2");
        let w = if dependent { vec![z1.clone(), z1.mul(&z1).unwrap()] } else { vec![z1, cf(&p, "x3 + x1*x2", "x4")] };
        let before = independence_rank(&w, EXACT).unwrap().min_rank;
        let after = independence_rank(&recombine(&random_coeffs(&mut rng), &w), EXACT).unwrap().min_rank;
        prop_assert_eq!(before, after);
    }

    #[test]
    fn superposition_is_covariant(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = p4();
        let acs = AlmostComplexStructure::standard(&p);
        let w = vec![cf(&p, "x1", "x2"), cf(&p, "x3", "x4")];
        let chart = SpencerChart::new(recombine(&random_coeffs(&mut rng), &w), vec![]).unwrap();
        // z1·z2 + z1²
        let h = w[0].mul(&w[1]).unwrap().add(&w[0].mul(&w[0]).unwrap()).unwrap();
        let r = superposition_check(&acs, &chart, &h, EXACT, 1e-10, None).unwrap();
        prop_assert!(r.passes);
    }
}
