//! Acceptance suite: one line per criterion, `PASS` or `FAIL`, with the
//! measured numbers. Exits nonzero when a criterion's outcome differs from the
//! recorded expectation in `EXPECTED_RED` (empty means every criterion must pass).

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spencer_core::brackets::{bracket_law_check, potential_vf_residual, splitting_projections, BracketCase, VectorFieldC};
use spencer_core::elliptic::{
    assemble_operator, contraction_identity_residual, ellipticity_certificate, operator_values, potential_curvature,
    solve_dirichlet, DirichletProblem,
};
use spencer_core::fixtures::{
    compose, default_diffeo, diagonal_structure, harmonic_samples, n1_structure, pullback_structure, random_normalized_pq,
    random_poly, random_pq, type1_structure,
};
use spencer_core::holomorphy::{reduction_equivalence_check, reduction_implication};
use spencer_core::hypercomplex::{j_hyperholo_residual, k_hyperholo_residual, QuaternionFunction};
use spencer_core::report::EXACT_TOL;
use spencer_core::spencer::{superposition_check, verify_chart, SpencerChart};
use spencer_core::structures::{
    block_identities, extract_pq, normalize_at_origin, quaternion_s, quaternion_t, reconstruct_from_pq, twistor_structure,
    AlmostComplexStructure, HypercomplexStructure,
};
use spencer_core::{ComplexField, DiffMode, Expr, Patch, ScalarField};

/// Criteria whose failure is recorded and analyzed; see the README.
///
/// 7: the five-point stencil is exact on cubic polynomials, so the discrete
/// solution for Re(z³) equals the analytic one up to roundoff and the error
/// ratio measures solver noise, not truncation. The same harness run with
/// non-polynomial harmonic data shows ratios near 4.
const EXPECTED_RED: &[u32] = &[7];

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn cube(dim: usize, lo: f64, hi: f64, r: usize) -> Arc<Patch> {
    Arc::new(Patch::cube(dim, lo, hi, r).unwrap())
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Sup over interior nodes of `|a − b|`.
fn field_gap(a: &ScalarField, b: &ScalarField) -> f64 {
    let nodes = a.patch().interior_nodes();
    let (sa, sb) = (a.samples().unwrap(), b.samples().unwrap());
    nodes.iter().fold(0.0f64, |m, &k| m.max((sa[k] - sb[k]).abs()))
}

fn c1_rule_star() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let patches = [cube(2, -0.5, 0.5, 9), cube(4, -0.5, 0.5, 5), cube(6, -0.5, 0.5, 3)];
    let mut worst = 0.0f64;
    let mut failures = 0;
    for i in 0..200 {
        let p = &patches[i % 3];
        let pq = random_pq(&mut rng, p);
        match reconstruct_from_pq(&pq) {
            Ok(acs) => worst = worst.max(acs.acs_residual()),
            Err(_) => failures += 1,
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    Outcome {
        id: 1,
        name: "rule (*) reconstruction gives J² = -E",
        pass: failures == 0 && worst <= 1e-10 && secs < 30.0,
        detail: format!("200 pairs (n = 1, 2, 3), max |J² + E| = {worst:.2e}, rejected {failures}, {secs:.1} s"),
    }
}

fn c2_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let patches = [cube(2, -0.5, 0.5, 9), cube(4, -0.5, 0.5, 5), cube(6, -0.5, 0.5, 3)];
    let mut round_trip = 0.0f64;
    let mut identities = 0.0f64;
    let mut decompositions = 0;
    for i in 0..60 {
        let p = &patches[i % 3];
        let pq = random_normalized_pq(&mut rng, p, 0.2).unwrap();
        let acs = reconstruct_from_pq(&pq).unwrap();
        let origin = p.nearest_node(&vec![0.0; p.dim()]).unwrap();
        let bd = normalize_at_origin(&acs, origin).unwrap();
        let back = extract_pq(&bd).unwrap();
        for (a, b) in [(pq.p(), back.p()), (pq.q(), back.q())] {
            for (x, y) in a.entries().iter().zip(b.entries()) {
                round_trip = round_trip.max(field_gap(x, y));
            }
        }
        identities = identities.max(block_identities(&bd, &acs).unwrap().max());
        decompositions += 1;
        // a non-normalized structure gives a genuine frame change
        let general = reconstruct_from_pq(&random_pq(&mut rng, p)).unwrap();
        if let Ok(bd) = normalize_at_origin(&general, origin) {
            identities = identities.max(block_identities(&bd, &general).unwrap().max());
            decompositions += 1;
        }
    }
    Outcome {
        id: 2,
        name: "extract_pq inverts reconstruct_from_pq; block identities",
        pass: round_trip <= 1e-10 && identities <= 1e-10,
        detail: format!(
            "60 normalized fixtures: max |(P,Q) - extract(reconstruct(P,Q))| = {round_trip:.2e}; \
             {decompositions} decompositions: max identity residual = {identities:.2e}"
        ),
    }
}

fn c3_block_proposition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let patches = [cube(2, -0.5, 0.5, 7), cube(4, -0.5, 0.5, 4)];
    let mut identity = 0.0f64;
    let mut implication = 0.0f64;
    let mut bound_ok = true;
    for i in 0..100 {
        let p = &patches[i % 2];
        let pq = random_normalized_pq(&mut rng, p, 0.2).unwrap();
        let acs = reconstruct_from_pq(&pq).unwrap();
        let origin = p.nearest_node(&vec![0.0; p.dim()]).unwrap();
        // the 4D grid has no node at 0, so the frame is not the identity and
        // (P, Q) must be read off in the normalized frame
        let bd = normalize_at_origin(&acs, origin).unwrap();
        let pq = extract_pq(&bd).unwrap();
        let f = ComplexField::new(
            ScalarField::from_expr(p, random_poly(&mut rng, p.dim(), 2, 1.0, 0.0)).unwrap(),
            ScalarField::from_expr(p, random_poly(&mut rng, p.dim(), 2, 1.0, 0.0)).unwrap(),
        )
        .unwrap();
        let r = reduction_equivalence_check(&acs, &bd, &pq, &f, DiffMode::Exact).unwrap();
        identity = identity.max(r.identity_residual);
        bound_ok &= r.bound_holds;
        implication = implication.max(reduction_implication(&bd, &pq, 8, i as u64).unwrap());
    }
    Outcome {
        id: 3,
        name: "block proposition and reduced => full",
        pass: identity <= 1e-10 && implication <= 1e-8 && bound_ok,
        detail: format!(
            "100 fixtures: identity residual {identity:.2e}; full residual on reduced-system kernel {implication:.2e}; \
             kappa bound held: {bound_ok}"
        ),
    }
}

fn c4_standard_reduction() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for p in [
        Arc::new(Patch::new(vec![(-1.0, 1.0), (0.0, 3.0)], vec![9, 13]).unwrap()),
        Arc::new(Patch::new(vec![(-1.0, 1.0), (0.0, 0.5), (-2.0, 2.0), (0.0, 1.0)], vec![5, 6, 7, 5]).unwrap()),
    ] {
        let d = p.dim();
        let acs = AlmostComplexStructure::standard(&p);
        let op = assemble_operator(&acs, DiffMode::Exact).unwrap();
        let a_exact = (0..d).all(|s| {
            (0..d).all(|q| op.a.get(s, q).as_constant() == Some(if s == q { 2.0 } else { 0.0 }))
        });
        let b_zero = op.b.iter().all(|b| b.as_constant() == Some(0.0));
        // twice the standard discrete Laplacian, built independently
        let mut expect = vec![0.0f64; op.stencil.width()];
        for s in 0..d {
            let inv_h2 = 1.0 / (p.spacing(s) * p.spacing(s));
            expect[0] += 2.0 * (-2.0 * inv_h2);
            expect[1 + 2 * s] = 2.0 * inv_h2;
            expect[2 + 2 * s] = 2.0 * inv_h2;
        }
        let bitwise = (0..op.stencil.nodes.len())
            .all(|i| op.stencil.row(i).iter().zip(&expect).all(|(a, b)| a.to_bits() == b.to_bits()));
        ok &= a_exact && b_zero && bitwise;
        notes.push(format!("{d}D: A = 2E {a_exact}, B = 0 {b_zero}, stencil = 2x Laplacian bitwise {bitwise}"));
    }
    Outcome {
        id: 4,
        name: "standard structure: Delta_J = 2 Delta",
        pass: ok,
        detail: notes.join("; "),
    }
}

/// Structures used where a criterion says "every fixture".
fn fixture_structures() -> Vec<(&'static str, AlmostComplexStructure)> {
    let p2 = cube(2, -1.0, 1.0, 9);
    let h2 = cube(2, -0.5, 0.5, 9);
    let p4 = cube(4, -1.0, 1.0, 5);
    let h4 = cube(4, -0.5, 0.5, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let flat = HypercomplexStructure::flat(&p4).unwrap();
    vec![
        ("standard 2D", AlmostComplexStructure::standard(&p2)),
        ("standard 4D", AlmostComplexStructure::standard(&p4)),
        ("n=1 polynomial", n1_structure(&p2).unwrap()),
        ("diagonal", diagonal_structure(&p2).unwrap()),
        ("type 1", type1_structure(&p4).unwrap()),
        ("pullback 2D", pullback_structure(&h2, &default_diffeo(2)).unwrap()),
        ("pullback 4D", pullback_structure(&h4, &default_diffeo(4)).unwrap()),
        ("random (P,Q) 2D", reconstruct_from_pq(&random_pq(&mut rng, &h2)).unwrap()),
        ("random (P,Q) 4D", reconstruct_from_pq(&random_pq(&mut rng, &h4)).unwrap()),
        ("flat J", flat.j.clone()),
        ("flat K", flat.k.clone()),
        ("twistor", twistor_structure(&flat, 0.48, 0.6, 0.64).unwrap()),
    ]
}

fn c5_ellipticity() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut worst_name = "";
    let mut ok = true;
    for (i, (name, acs)) in fixture_structures().into_iter().enumerate() {
        let op = assemble_operator(&acs, DiffMode::Exact).unwrap();
        match ellipticity_certificate(&acs, &op, 10_000, 50 + i as u64) {
            Ok(r) => {
                ok &= r.passes;
                if r.min_value < worst {
                    worst = r.min_value;
                    worst_name = name;
                }
            }
            Err(_) => ok = false,
        }
    }
    Outcome {
        id: 5,
        name: "ellipticity xi^T A xi >= 1",
        pass: ok && worst >= 1.0 - 1e-10,
        detail: format!("12 fixtures x 10^4 samples: min xi^T A xi = {worst:.12} ({worst_name})"),
    }
}

/// `u = h ∘ φ` for the harmonic samples `h`, with cross terms in 4D.
fn pluriharmonic_fixtures(p: &Arc<Patch>, phi: &[Expr]) -> Vec<ScalarField> {
    let mut out: Vec<ScalarField> = harmonic_samples(&Expr::var(0), &Expr::var(1))
        .iter()
        .map(|h| compose(p, h, phi).unwrap())
        .collect();
    if p.dim() == 4 {
        // Re(z1 z2) and Im(z1 z2)
        let (a, b, c, d) = (Expr::var(0), Expr::var(1), Expr::var(2), Expr::var(3));
        out.push(compose(p, &(&(&a * &c) - &(&b * &d)), phi).unwrap());
        out.push(compose(p, &(&(&a * &d) + &(&b * &c)), phi).unwrap());
    }
    out
}

fn c6_contraction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let h2 = cube(2, -0.5, 0.5, 7);
    let h4 = cube(4, -0.5, 0.5, 5);
    let mut identity = 0.0f64;
    for i in 0..100 {
        let p = if i % 2 == 0 { &h2 } else { &h4 };
        let acs = match i % 4 {
            0 | 1 => reconstruct_from_pq(&random_pq(&mut rng, p)).unwrap(),
            2 => pullback_structure(p, &default_diffeo(2)).unwrap(),
            _ => pullback_structure(p, &default_diffeo(4)).unwrap(),
        };
        let d = p.dim();
        let extra = &Expr::call(spencer_core::expr::Func::Sin, &Expr::var(0)) * &Expr::var(d - 1);
        let u = ScalarField::from_expr(p, &random_poly(&mut rng, d, 2, 1.0, 0.0) + &(extra * rng.gen_range(-1.0..1.0))).unwrap();
        identity = identity.max(contraction_identity_residual(&acs, &u, DiffMode::Exact).unwrap().sup_norm);
    }
    // manufactured pluriharmonic functions of pullback structures
    let mut exact = 0.0f64;
    for (p, phi) in [(cube(2, -0.5, 0.5, 9), default_diffeo(2)), (cube(4, -0.5, 0.5, 5), default_diffeo(4))] {
        let acs = pullback_structure(&p, &phi).unwrap();
        let op = assemble_operator(&acs, DiffMode::Exact).unwrap();
        for u in pluriharmonic_fixtures(&p, &phi) {
            exact = exact.max(max_abs(&operator_values(&acs, &op, &u, DiffMode::Exact).unwrap()));
        }
    }
    // finite-difference order on three nested 2D grids
    let phi = default_diffeo(2);
    let mut orders = Vec::new();
    let h = harmonic_samples(&Expr::var(0), &Expr::var(1));
    for hk in &h {
        let errs: Vec<f64> = [17, 33, 65]
            .iter()
            .map(|&r| {
                let p = cube(2, -0.5, 0.5, r);
                let acs = pullback_structure(&p, &phi).unwrap();
                let op = assemble_operator(&acs, DiffMode::FiniteDifference).unwrap();
                let u = compose(&p, hk, &phi).unwrap();
                max_abs(&operator_values(&acs, &op, &u, DiffMode::FiniteDifference).unwrap())
            })
            .collect();
        orders.push((errs[1] / errs[2]).log2());
    }
    let orders_ok = orders.iter().all(|o| (o - 2.0).abs() <= 0.5);
    Outcome {
        id: 6,
        name: "Delta_J u = sum J R; pluriharmonic => Delta_J u = 0",
        pass: identity <= 1e-10 && exact <= 1e-10 && orders_ok,
        detail: format!(
            "100 random (J,u): identity residual {identity:.2e}; pullback pluriharmonics exact |Delta_J u| = {exact:.2e}; \
             FD orders (33->65) {}",
            orders.iter().map(|o| format!("{o:.2}")).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn c7_dirichlet() -> Outcome {
    let t0 = Instant::now();
    let oracle = "x1^3 - 3*x1*x2^2";
    let grid_errors = |expr: &str| -> Vec<f64> {
        [17, 33, 65]
            .iter()
            .map(|&r| {
                let p = cube(2, -1.0, 1.0, r);
                let acs = AlmostComplexStructure::standard(&p);
                let op = assemble_operator(&acs, DiffMode::Exact).unwrap();
                let exact = ScalarField::parse(&p, expr).unwrap();
                let mut prob = DirichletProblem::new(&op, exact.clone());
                prob.tolerance = 1e-12;
                let sol = solve_dirichlet(&prob).unwrap();
                field_gap(&sol.field, &exact)
            })
            .collect()
    };
    let errs = grid_errors(oracle);
    let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
    let smooth = grid_errors("exp(x1)*cos(x2)");
    let ratio_ok = ratios.iter().all(|r| (3.0..=5.0).contains(r));
    // maximum principle on monotone-regime fixtures
    let mut mp_ok = true;
    let mut mp_cases = 0;
    let tol = 1e-8;
    for r in [17, 33] {
        let p = cube(2, -1.0, 1.0, r);
        let structures = [AlmostComplexStructure::standard(&p), diagonal_structure(&p).unwrap()];
        for acs in &structures {
            let op = assemble_operator(acs, DiffMode::Exact).unwrap();
            if !op.stencil.is_monotone() {
                continue;
            }
            for bc in [oracle, "exp(x1)*cos(x2)", "sin(3*x1)*x2 + x1^2"] {
                let g = ScalarField::parse(&p, bc).unwrap();
                let mut prob = DirichletProblem::new(&op, g);
                prob.tolerance = tol;
                let s = solve_dirichlet(&prob).unwrap();
                mp_ok &= s.stats.interior_max <= s.stats.boundary_max + 10.0 * tol
                    && s.stats.interior_min >= s.stats.boundary_min - 10.0 * tol;
                mp_cases += 1;
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    Outcome {
        id: 7,
        name: "Dirichlet convergence ratio in [3,5]; maximum principle",
        pass: ratio_ok && mp_ok && mp_cases > 0 && secs < 60.0,
        detail: format!(
            "Re(z^3) errors {:.2e}, {:.2e}, {:.2e}, ratios {:.2}, {:.2}; \
             (exp(x1)cos(x2) for comparison: ratios {:.2}, {:.2}); max principle {mp_ok} on {mp_cases} monotone cases; {secs:.1} s",
            errs[0],
            errs[1],
            errs[2],
            ratios[0],
            ratios[1],
            smooth[0] / smooth[1],
            smooth[1] / smooth[2]
        ),
    }
}

fn c8_quaternions() -> Outcome {
    let s = quaternion_s();
    let t = quaternion_t();
    let printed_s = [[0., 1., 0., 0.], [-1., 0., 0., 0.], [0., 0., 0., -1.], [0., 0., 1., 0.]];
    let printed_t = [[0., 0., 1., 0.], [0., 0., 0., 1.], [-1., 0., 0., 0.], [0., -1., 0., 0.]];
    let entries = (0..4).all(|i| (0..4).all(|j| s[(i, j)] == printed_s[i][j] && t[(i, j)] == printed_t[i][j]));
    let e = nalgebra::DMatrix::<f64>::identity(4, 4);
    let st = &s * &t;
    let algebra = &s * &s == -&e && &t * &t == -&e && &st * &st == -&e && (&s * &t + &t * &s).iter().all(|&v| v == 0.0);
    let p = cube(4, -1.0, 1.0, 5);
    let flat = HypercomplexStructure::flat(&p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let v: Vec<f64> = loop {
            let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-3 && n <= 1.0 {
                break v.into_iter().map(|x| x / n).collect();
            }
        };
        let acs = twistor_structure(&flat, v[0], v[1], v[2]).unwrap();
        worst = worst.max(acs.acs_residual());
    }
    Outcome {
        id: 8,
        name: "quaternionic matrices and the twistor sphere",
        pass: entries && algebra && worst <= 1e-12,
        detail: format!("S, T as printed: {entries}; S²=T²=(ST)²=-E, ST+TS=0 exactly: {algebra}; 100 twistor points max |J²+E| = {worst:.2e}"),
    }
}

fn c9_hyperholomorphy() -> Outcome {
    let p = cube(4, -1.0, 1.0, 5);
    let h = HypercomplexStructure::flat(&p).unwrap();
    let m = DiffMode::Exact;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut maps = vec![QuaternionFunction::identity(&p).unwrap()];
    for _ in 0..20 {
        let a: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
        let b: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
        maps.push(QuaternionFunction::affine(&p, a, b).unwrap());
    }
    let mut good = 0.0f64;
    for f in &maps {
        good = good.max(j_hyperholo_residual(&h, f, m).unwrap().residual.sup_norm);
        good = good.max(k_hyperholo_residual(&h, f, m).unwrap().residual.sup_norm);
    }
    let rejected: Vec<(f64, f64)> = [QuaternionFunction::conjugate(&p).unwrap(), QuaternionFunction::square(&p).unwrap()]
        .iter()
        .map(|f| {
            (
                j_hyperholo_residual(&h, f, m).unwrap().residual.sup_norm,
                k_hyperholo_residual(&h, f, m).unwrap().residual.sup_norm,
            )
        })
        .collect();
    let reject_ok = rejected.iter().all(|&(j, k)| j > 0.1 && k > 0.1);
    Outcome {
        id: 9,
        name: "hyperholomorphy of affine maps; q-bar and q² rejected",
        pass: good <= 1e-10 && reject_ok,
        detail: format!(
            "identity + 20 affine maps: max J/K residual {good:.2e}; q-bar (J {:.2}, K {:.2}), q² (J {:.2}, K {:.2})",
            rejected[0].0, rejected[0].1, rejected[1].0, rejected[1].1
        ),
    }
}

/// Random real polynomial vector field of degree ≤ 2.
fn random_vf(rng: &mut ChaCha8Rng, p: &Arc<Patch>) -> VectorFieldC {
    let comps = (0..p.dim())
        .map(|_| {
            let (c0, c1) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            ComplexField::new(
                ScalarField::from_expr(p, random_poly(rng, p.dim(), 2, 1.0, c0)).unwrap(),
                ScalarField::from_expr(p, random_poly(rng, p.dim(), 1, 1.0, c1)).unwrap(),
            )
            .unwrap()
        })
        .collect();
    VectorFieldC::new(comps).unwrap()
}

fn c10_spencer_and_brackets() -> Outcome {
    let m = DiffMode::Exact;
    let p4 = cube(4, -1.0, 1.0, 5);
    let acs = type1_structure(&p4).unwrap();
    let z = ComplexField::parse(&p4, "x1", "x2").unwrap();
    let w = ComplexField::parse(&p4, "x3", "x4").unwrap();
    let chart = SpencerChart::new(vec![z.clone()], vec![w.clone()]).unwrap();
    let good = verify_chart(&acs, &chart, m, 1e-8).unwrap();
    let bad = verify_chart(&acs, &SpencerChart::new(vec![z.clone(), w], vec![]).unwrap(), m, 1e-8).unwrap();
    let h = z.mul(&z).unwrap();
    let sup = superposition_check(&acs, &chart, &h, m, 1e-8, Some(2)).unwrap();
    let fit = sup.fit.as_ref().unwrap();
    // coefficient of w² in the fit of H
    let w2 = fit.monomials.iter().position(|mon| mon == &vec![2]).unwrap();
    let h_is_square = (fit.coefficients[w2].0 - 1.0).abs() < 1e-8 && fit.coefficients[w2].1.abs() < 1e-8;

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let p2 = cube(2, -1.0, 1.0, 5);
    let structures = [
        AlmostComplexStructure::standard(&p2),
        n1_structure(&p2).unwrap(),
        diagonal_structure(&p2).unwrap(),
    ];
    let cases = [
        BracketCase::Holomorphic,
        BracketCase::Antiholomorphic,
        BracketCase::Mixed,
        BracketCase::MixedReversed,
    ];
    let mut law = 0.0f64;
    let mut display_disagreements = 0;
    for i in 0..50 {
        let s = &structures[i % structures.len()];
        let case = cases[i % 4];
        let (x10, x01) = splitting_projections(s, &random_vf(&mut rng, &p2)).unwrap();
        let (y10, y01) = splitting_projections(s, &random_vf(&mut rng, &p2)).unwrap();
        let (x, y) = match case {
            BracketCase::Holomorphic => (x10, y10),
            BracketCase::Antiholomorphic => (x01, y01),
            BracketCase::Mixed => (x10, y01),
            BracketCase::MixedReversed => (x01, y10),
        };
        let u = ComplexField::real(ScalarField::from_expr(&p2, random_poly(&mut rng, 2, 2, 1.0, 0.0)).unwrap());
        let r = bracket_law_check(s, &x, &y, &u, case, m, 1e-10).unwrap();
        law = law.max(r.derived.sup_norm);
        if !r.display_agrees {
            display_disagreements += 1;
        }
    }
    let pass = good.passes && good.max_residual() <= 1e-8 && !bad.passes && bad.max_residual() > 0.1 && sup.passes && h_is_square && law <= 1e-10;
    Outcome {
        id: 10,
        name: "Spencer chart pattern, superposition, bracket laws",
        pass,
        detail: format!(
            "type-1 m=1 pattern residual {:.2e}; m=2 claim residual {:.2}; h=z² complement coefficients {:.2e}, H(w)=w² {h_is_square}; \
             50 eigenfield pairs: max law residual {law:.2e} (derived signs; displayed mixed-case sign disagrees in {display_disagreements})",
            good.max_residual(),
            bad.max_residual(),
            sup.complement_coefficients.sup_norm
        ),
    }
}

fn c11_cross_module() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut count = 0;
    for (_, acs) in fixture_structures() {
        let p = acs.patch().clone();
        let d = p.dim();
        let u = ScalarField::from_expr(&p, random_poly(&mut rng, d, 2, 1.0, 0.0)).unwrap();
        let r = potential_curvature(&acs, &u, DiffMode::Exact).unwrap();
        let uc = ComplexField::real(u.clone());
        for s in 0..d {
            for q in s + 1..d {
                let v = potential_vf_residual(
                    &acs,
                    &VectorFieldC::coordinate(&p, s),
                    &VectorFieldC::coordinate(&p, q),
                    &uc,
                    DiffMode::Exact,
                )
                .unwrap();
                worst = worst.max(field_gap(&v.re, &r.get(s, q)));
                worst = worst.max(max_abs(&p.interior_nodes().iter().map(|&k| v.im.value_at(k).unwrap()).collect::<Vec<_>>()));
                count += 1;
            }
        }
    }
    Outcome {
        id: 11,
        name: "bracket form of d(J*du) equals the elliptic module's R_sq",
        pass: worst <= EXACT_TOL,
        detail: format!("12 fixtures, {count} coordinate pairs: max gap {worst:.2e}"),
    }
}

fn main() {
    let criteria: [fn() -> Outcome; 11] = [
        c1_rule_star,
        c2_round_trip,
        c3_block_proposition,
        c4_standard_reduction,
        c5_ellipticity,
        c6_contraction,
        c7_dirichlet,
        c8_quaternions,
        c9_hyperholomorphy,
        c10_spencer_and_brackets,
        c11_cross_module,
    ];
    let mut unexpected = Vec::new();
    let mut passed = 0;
    for c in criteria {
        let o = c();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("{status} criterion {:>2}: {} | {}", o.id, o.name, o.detail);
        if o.pass {
            passed += 1;
        }
        if o.pass == EXPECTED_RED.contains(&o.id) {
            unexpected.push(o.id);
        }
    }
    println!("acceptance: {passed}/11 criteria pass");
    if !unexpected.is_empty() {
        println!("acceptance: outcome differs from the recorded expectation for {unexpected:?}");
        std::process::exit(1);
    }
}
