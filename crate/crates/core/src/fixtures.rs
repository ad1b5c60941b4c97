//! Structures and functions with known properties, used by tests, benches
//! and the CLI.

use std::sync::Arc;

use rand::Rng;

use crate::error::Result;
use crate::expr::{parse_expr, Expr, Func};
use crate::field::{MatrixField, ScalarField};
use crate::grid::Patch;
use crate::linalg;
use crate::structures::{AlmostComplexStructure, PqPair};

fn exprs(patch: &Arc<Patch>, rows: &[&[&str]]) -> Result<MatrixField> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| r.iter().map(|s| s.to_string()).collect())
        .collect();
    MatrixField::parse(patch, &rows)
}

/// The non-constant `n = 1` structure `j_cot = [[x2, x2²+1], [-1, -x2]]`.
pub fn n1_structure(patch: &Arc<Patch>) -> Result<AlmostComplexStructure> {
    AlmostComplexStructure::from_cotangent(exprs(
        patch,
        &[&["x2", "x2^2 + 1"], &["-1", "-x2"]],
    )?)
}

/// `j_cot = [[0, a], [-1/a, 0]]` with `a = 1 + x2/4`: non-constant, with a
/// diagonal principal part `diag(1/a² + 1, a² + 1)`, so its stencil is
/// monotone on fine grids. Needs `|x2| < 4`.
pub fn diagonal_structure(patch: &Arc<Patch>) -> Result<AlmostComplexStructure> {
    AlmostComplexStructure::from_cotangent(exprs(
        patch,
        &[&["0", "1 + 0.25*x2"], &["-1/(1 + 0.25*x2)", "0"]],
    )?)
}

/// Structure on R⁴ with `J*dz = i dz`, `J*dw = i dw + w dz̄` for
/// `z = x1 + i x2`, `w = x3 + i x4`. Of the chart coordinates only `z` is
/// almost holomorphic, so the chart `(z | w)` shows the type-1 pattern. The
/// structure itself is integrable: `w·exp(−i z̄/2)` is holomorphic.
pub fn type1_structure(patch: &Arc<Patch>) -> Result<AlmostComplexStructure> {
    AlmostComplexStructure::from_cotangent(exprs(
        patch,
        &[
            &["0", "1", "x3", "x4"],
            &["-1", "0", "x4", "-x3"],
            &["0", "0", "0", "1"],
            &["0", "0", "-1", "0"],
        ],
    )?)
}

/// Default diffeomorphism for pullback fixtures, one quadratic shear per
/// coordinate pair.
pub fn default_diffeo(dim: usize) -> Vec<Expr> {
    let mut out = Vec::with_capacity(dim);
    for p in 0..dim / 2 {
        let (a, b) = (Expr::var(2 * p), Expr::var(2 * p + 1));
        out.push(&a + &(Expr::powi(&b, 2) * 0.2));
        out.push(&b + &(Expr::powi(&a, 2) * 0.1));
    }
    out
}

/// Jacobian `Dφ[i][j] = ∂φ_i/∂x_j`.
pub fn jacobian(patch: &Arc<Patch>, phi: &[Expr]) -> Result<MatrixField> {
    let d = phi.len();
    MatrixField::try_from_fn(d, d, |i, j| ScalarField::from_expr(patch, phi[i].diff(j)))
}

/// Integrable structure induced by `φ`: `j_tan = Dφ⁻¹ S⁰ Dφ`, where `S⁰` is the
/// standard tangent matrix. Holomorphic functions are `h ∘ φ`.
pub fn pullback_structure(patch: &Arc<Patch>, phi: &[Expr]) -> Result<AlmostComplexStructure> {
    let dphi = jacobian(patch, phi)?;
    let inv = linalg::inverse_field(&dphi, "Dφ")?;
    let s0 = MatrixField::from_constant(
        patch,
        &crate::structures::standard_cotangent(patch.dim()).transpose(),
    );
    AlmostComplexStructure::from_tangent(inv.mul(&s0)?.mul(&dphi)?)
}

/// `h ∘ φ` as a field.
pub fn compose(patch: &Arc<Patch>, h: &Expr, phi: &[Expr]) -> Result<ScalarField> {
    ScalarField::from_expr(patch, h.substitute(phi))
}

/// Random polynomial of total degree ≤ `degree` with coefficients in
/// `[-amp, amp]`; the constant term is `constant`.
pub fn random_poly<R: Rng>(rng: &mut R, dim: usize, degree: usize, amp: f64, constant: f64) -> Expr {
    let mut terms = vec![Expr::num(constant)];
    if degree >= 1 {
        for i in 0..dim {
            terms.push(Expr::var(i) * rng.gen_range(-amp..amp));
        }
    }
    if degree >= 2 {
        for i in 0..dim {
            for j in i..dim {
                terms.push(&(&Expr::var(i) * &Expr::var(j)) * rng.gen_range(-amp..amp));
            }
        }
    }
    Expr::sum(&terms)
}

/// Random `(P, Q)` with polynomial entries of degree ≤ 2, normalized at the
/// origin (`P(0) = 0`, `Q(0) = -E`) and small enough that `Q` stays
/// invertible on `[-1/2, 1/2]^{2n}`.
pub fn random_normalized_pq<R: Rng>(rng: &mut R, patch: &Arc<Patch>, amp: f64) -> Result<PqPair> {
    let n = patch.dim_half();
    let d = patch.dim();
    let p = MatrixField::try_from_fn(n, n, |_, _| {
        ScalarField::from_expr(patch, random_poly(rng, d, 2, amp, 0.0))
    })?;
    let q = MatrixField::try_from_fn(n, n, |i, j| {
        let c = if i == j { -1.0 } else { 0.0 };
        ScalarField::from_expr(patch, random_poly(rng, d, 2, amp, c))
    })?;
    PqPair::new(p, q)
}

/// Random `(P, Q)` with unconstrained degree ≤ 2 entries; resamples until `Q`
/// is invertible on the patch.
pub fn random_pq<R: Rng>(rng: &mut R, patch: &Arc<Patch>) -> PqPair {
    let n = patch.dim_half();
    let d = patch.dim();
    loop {
        let p = MatrixField::try_from_fn(n, n, |_, _| {
            let c = rng.gen_range(-1.0..1.0);
            ScalarField::from_expr(patch, random_poly(rng, d, 2, 1.0, c))
        });
        let q = MatrixField::try_from_fn(n, n, |i, j| {
            let c = if i == j { rng.gen_range(1.5..3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 } } else { rng.gen_range(-0.5..0.5) };
            ScalarField::from_expr(patch, random_poly(rng, d, 2, 0.4, c))
        });
        if let (Ok(p), Ok(q)) = (p, q) {
            if let Ok(pq) = PqPair::new(p, q) {
                return pq;
            }
        }
    }
}

/// Harmonic functions of two variables `(a, b)` used as oracles.
pub fn harmonic_samples(a: &Expr, b: &Expr) -> Vec<Expr> {
    let sq = |e: &Expr| Expr::powi(e, 2);
    vec![
        &sq(a) - &sq(b),
        a * b,
        &Expr::powi(a, 3) - &(&(a * &sq(b)) * 3.0),
        &Expr::call(Func::Exp, a) * &Expr::call(Func::Cos, b),
        &Expr::call(Func::Exp, b) * &Expr::call(Func::Sin, a),
    ]
}

/// Parses `text` on `patch`'s dimension; convenience for fixtures.
pub fn expr(patch: &Patch, text: &str) -> Result<Expr> {
    parse_expr(text, patch.dim())
}
