//! Cauchy–Riemann residuals of complex functions and the reduced system in a
//! normalized frame.
//!
//! `f = u + iv` is almost holomorphic when `J*df = i df`, i.e.
//! `(j_cot − iE)∇f = 0`; in real form `j_cot∇u + ∇v = 0` and `j_cot∇v − ∇u = 0`.
//! The per-node residual is the Euclidean norm of the complex vector
//! `(j_cot ∓ iE)∇f`; the breakdown lists the max-norm of each real system.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{ComplexField, DiffMode, Evaluator, ScalarField};
use crate::linalg::{complexify, inf_norm_c, C64};
use crate::par;
use crate::report::{ResidualReport, EXACT_TOL};
use crate::structures::{AlmostComplexStructure, BlockDecomposition, PqPair};

fn check_dims(acs: &AlmostComplexStructure, f: &ComplexField) -> Result<()> {
    if f.patch().dim() != acs.dim() {
        return Err(Error::DimensionMismatch(format!(
            "function on a {}-dimensional patch, structure of size {}",
            f.patch().dim(),
            acs.dim()
        )));
    }
    if **f.patch() != **acs.patch() {
        return Err(Error::PatchMismatch);
    }
    Ok(())
}

/// `[∂u..., ∂v...]`.
pub fn complex_gradient(f: &ComplexField, mode: DiffMode) -> Result<Vec<ScalarField>> {
    let mut g = f.re.gradient(mode)?;
    g.extend(f.im.gradient(mode)?);
    Ok(g)
}

fn cr_residual(
    acs: &AlmostComplexStructure,
    f: &ComplexField,
    mode: DiffMode,
    sign: f64,
    anchor: &str,
) -> Result<ResidualReport> {
    check_dims(acs, f)?;
    let patch = acs.patch().clone();
    let d = acs.dim();
    let mut fields = acs.j_cot().entries().to_vec();
    fields.extend(complex_gradient(f, mode)?);
    let nodes = patch.interior_nodes();
    let table = Evaluator::new(&fields)?.table(&nodes)?;
    let rows = par::map_range(nodes.len(), |i| {
        let row = table.row(i);
        let j = &row[..d * d];
        let gu = &row[d * d..d * d + d];
        let gv = &row[d * d + d..];
        let (mut sq, mut e1, mut e2) = (0.0, 0.0f64, 0.0f64);
        for q in 0..d {
            let ju: f64 = (0..d).map(|p| j[q * d + p] * gu[p]).sum();
            let jv: f64 = (0..d).map(|p| j[q * d + p] * gv[p]).sum();
            // real and imaginary parts of ((j_cot - sign·iE)∇f)_q
            let re = ju + sign * gv[q];
            let im = jv - sign * gu[q];
            sq += re * re + im * im;
            e1 = e1.max(re.abs());
            e2 = e2.max(im.abs());
        }
        [sq.sqrt(), e1, e2]
    });
    let values: Vec<f64> = rows.iter().flatten().copied().collect();
    let (n1, n2) = if sign > 0.0 {
        ("J*du + dv", "J*dv - du")
    } else {
        ("J*du - dv", "J*dv + du")
    };
    let mut report = ResidualReport::from_values(
        anchor,
        mode,
        &patch,
        &nodes,
        &["complex", n1, n2],
        &values,
    );
    report.equations.remove(0);
    Ok(report)
}

/// Residual of `J*df = i df` over interior nodes.
pub fn holo_residual(
    acs: &AlmostComplexStructure,
    f: &ComplexField,
    mode: DiffMode,
) -> Result<ResidualReport> {
    cr_residual(acs, f, mode, 1.0, "almost holomorphic: J*df = i df")
}

/// Residual of `J*df = -i df` over interior nodes.
pub fn antiholo_residual(
    acs: &AlmostComplexStructure,
    f: &ComplexField,
    mode: DiffMode,
) -> Result<ResidualReport> {
    cr_residual(acs, f, mode, -1.0, "almost antiholomorphic: J*df = -i df")
}

fn frame_gradient(bd: &BlockDecomposition, gu: &[f64], gv: &[f64]) -> DVector<C64> {
    let grad = DVector::from_fn(gu.len(), |k, _| C64::new(gu[k], gv[k]));
    complexify(&bd.g_inv) * grad
}

/// Residual of the reduced system `g₁ + (P − iQ) g₂ = 0`, `g = G⁻¹∇f`.
pub fn reduced_system_residual(
    bd: &BlockDecomposition,
    pq: &PqPair,
    f: &ComplexField,
    mode: DiffMode,
) -> Result<ResidualReport> {
    let patch = bd.patch().clone();
    if **f.patch() != *patch || **pq.patch() != *patch {
        return Err(Error::PatchMismatch);
    }
    let n = bd.n();
    let d = 2 * n;
    let mut fields = pq.p().entries().to_vec();
    fields.extend(pq.q().entries().iter().cloned());
    fields.extend(complex_gradient(f, mode)?);
    let nodes = patch.interior_nodes();
    let table = Evaluator::new(&fields)?.table(&nodes)?;
    let nn = n * n;
    let values = par::map_range(nodes.len(), |i| {
        let row = table.row(i);
        let p = DMatrix::from_row_slice(n, n, &row[..nn]);
        let q = DMatrix::from_row_slice(n, n, &row[nn..2 * nn]);
        let g = frame_gradient(bd, &row[2 * nn..2 * nn + d], &row[2 * nn + d..]);
        let m = p.map(|v| C64::new(v, 0.0)) - q.map(|v| C64::new(0.0, v));
        let r = g.rows(0, n) + m * g.rows(n, n);
        r.norm()
    });
    Ok(ResidualReport::scalar(
        "reduced system [E, P - iQ] G^-1 df = 0",
        mode,
        &patch,
        &nodes,
        "reduced",
        &values,
    ))
}

/// Outcome of the block-proposition check.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ReductionReport {
    pub anchor: String,
    pub mode: DiffMode,
    /// `‖[A−iE, B+E] − (A−iE)(C−E)⁻¹[C−E, D−iE]‖∞`, worst node.
    pub identity_residual: f64,
    /// `‖(G⁻¹ j_cot G − iE) G⁻¹∇f‖`.
    pub full_residual: f64,
    /// `‖[C−E, D−iE] G⁻¹∇f‖`.
    pub bottom_residual: f64,
    /// `‖[E, P−iQ] G⁻¹∇f‖`.
    pub reduced_residual: f64,
    /// Largest `κ = ‖(A−iE)(C−E)⁻¹‖₂ + 1`.
    pub kappa_max: f64,
    /// Largest `full / (κ · bottom)` over nodes with nonzero bottom residual.
    pub bound_ratio: f64,
    pub identity_holds: bool,
    pub bound_holds: bool,
}

impl ReductionReport {
    pub fn passes(&self) -> bool {
        self.identity_holds && self.bound_holds
    }
}

struct Blocks {
    a: DMatrix<C64>,
    bpe: DMatrix<C64>,
    k: DMatrix<C64>,
    dmi: DMatrix<C64>,
    n: usize,
}

fn split_blocks(n: usize, norm: &DMatrix<f64>) -> Blocks {
    let c = complexify(norm);
    let ie = DMatrix::<C64>::identity(n, n) * C64::new(0.0, 1.0);
    Blocks {
        a: c.view((0, 0), (n, n)).into_owned(),
        bpe: c.view((0, n), (n, n)).into_owned(),
        k: c.view((n, 0), (n, n)).into_owned(),
        dmi: c.view((n, n), (n, n)).into_owned() - ie,
        n,
    }
}

impl Blocks {
    fn multiplier(&self) -> Option<DMatrix<C64>> {
        let ie = DMatrix::<C64>::identity(self.n, self.n) * C64::new(0.0, 1.0);
        let kinv = self.k.clone().try_inverse()?;
        Some((&self.a - ie) * kinv)
    }

    fn identity_residual(&self, mult: &DMatrix<C64>) -> f64 {
        let n = self.n;
        let ie = DMatrix::<C64>::identity(n, n) * C64::new(0.0, 1.0);
        let mut lhs = DMatrix::<C64>::zeros(n, 2 * n);
        lhs.view_mut((0, 0), (n, n)).copy_from(&(&self.a - ie));
        lhs.view_mut((0, n), (n, n)).copy_from(&self.bpe);
        let mut bottom = DMatrix::<C64>::zeros(n, 2 * n);
        bottom.view_mut((0, 0), (n, n)).copy_from(&self.k);
        bottom.view_mut((0, n), (n, n)).copy_from(&self.dmi);
        inf_norm_c(&(lhs - mult * bottom))
    }

    fn bottom(&self, g: &DVector<C64>) -> DVector<C64> {
        &self.k * g.rows(0, self.n) + &self.dmi * g.rows(self.n, self.n)
    }
}

fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Checks the block identity pointwise and the bound
/// `full ≤ (‖(A−iE)(C−E)⁻¹‖₂ + 1) · bottom` for a function `f`.
pub fn reduction_equivalence_check(
    acs: &AlmostComplexStructure,
    bd: &BlockDecomposition,
    pq: &PqPair,
    f: &ComplexField,
    mode: DiffMode,
) -> Result<ReductionReport> {
    check_dims(acs, f)?;
    let patch = bd.patch().clone();
    let n = bd.n();
    let d = 2 * n;
    let mut fields = bd.normalized.entries().to_vec();
    fields.extend(pq.p().entries().iter().cloned());
    fields.extend(pq.q().entries().iter().cloned());
    fields.extend(complex_gradient(f, mode)?);
    let nodes = patch.interior_nodes();
    let table = Evaluator::new(&fields)?.table(&nodes)?;
    let nn = n * n;
    let rows = par::map_range(nodes.len(), |i| -> Result<[f64; 6]> {
        let row = table.row(i);
        let norm = DMatrix::from_row_slice(d, d, &row[..d * d]);
        let off = d * d;
        let p = DMatrix::from_row_slice(n, n, &row[off..off + nn]);
        let q = DMatrix::from_row_slice(n, n, &row[off + nn..off + 2 * nn]);
        let goff = off + 2 * nn;
        let g = frame_gradient(bd, &row[goff..goff + d], &row[goff + d..]);
        let blocks = split_blocks(n, &norm);
        let mult = blocks.multiplier().ok_or_else(|| Error::Singular {
            what: "C - E".into(),
            node: patch.multi_index(nodes[i]),
            hint: None,
        })?;
        let ident = blocks.identity_residual(&mult);
        let full = ((complexify(&norm) - DMatrix::<C64>::identity(d, d) * C64::new(0.0, 1.0)) * &g).norm();
        let bottom = blocks.bottom(&g).norm();
        let pmiq = p.map(|v| C64::new(v, 0.0)) - q.map(|v| C64::new(0.0, v));
        let reduced = (g.rows(0, n) + pmiq * g.rows(n, n)).norm();
        let kappa = spectral_norm(&mult) + 1.0;
        let ratio = if bottom > 0.0 {
            full / (kappa * bottom)
        } else if full > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        Ok([ident, full, bottom, reduced, kappa, ratio])
    });
    let mut acc = [0.0f64; 6];
    for r in rows {
        for (a, v) in acc.iter_mut().zip(r?) {
            *a = a.max(v);
        }
    }
    let fscale = 1.0 + acc[1];
    Ok(ReductionReport {
        anchor: "block identity [A-iE, B+E] = (A-iE)(C-E)^-1 [C-E, D-iE]".into(),
        mode,
        identity_residual: acc[0],
        full_residual: acc[1],
        bottom_residual: acc[2],
        reduced_residual: acc[3],
        kappa_max: acc[4],
        bound_ratio: acc[5],
        identity_holds: acc[0] <= EXACT_TOL,
        bound_holds: acc[5] <= 1.0 + 1e-10 || acc[1] <= 1e-14 * fscale,
    })
}

/// Pointwise form of "reduced system solved ⇒ full system solved": at each
/// node, takes `g = (−(P − iQ)w, w)` for `samples` random `w` and returns the
/// largest `‖(G⁻¹ j_cot G − iE) g‖ / ‖g‖`.
pub fn reduction_implication(
    bd: &BlockDecomposition,
    pq: &PqPair,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let patch = bd.patch().clone();
    let n = bd.n();
    let d = 2 * n;
    let mut fields = bd.normalized.entries().to_vec();
    fields.extend(pq.p().entries().iter().cloned());
    fields.extend(pq.q().entries().iter().cloned());
    let nodes = patch.all_nodes();
    let table = Evaluator::new(&fields)?.table(&nodes)?;
    let nn = n * n;
    let worst = par::map_range(nodes.len(), |i| {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let row = table.row(i);
        let norm = complexify(&DMatrix::from_row_slice(d, d, &row[..d * d]));
        let p = DMatrix::from_row_slice(n, n, &row[d * d..d * d + nn]);
        let q = DMatrix::from_row_slice(n, n, &row[d * d + nn..d * d + 2 * nn]);
        let pmiq = p.map(|v| C64::new(v, 0.0)) - q.map(|v| C64::new(0.0, v));
        let op = norm - DMatrix::<C64>::identity(d, d) * C64::new(0.0, 1.0);
        let mut worst = 0.0f64;
        for _ in 0..samples {
            let w = DVector::from_fn(n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let top = -(&pmiq * &w);
            let mut g = DVector::<C64>::zeros(d);
            g.rows_mut(0, n).copy_from(&top);
            g.rows_mut(n, n).copy_from(&w);
            worst = worst.max((&op * &g).norm() / g.norm());
        }
        worst
    });
    Ok(worst.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Patch;
    use std::sync::Arc;

    fn std2(r: usize) -> (Arc<Patch>, AlmostComplexStructure) {
        let p = Arc::new(Patch::cube(2, -1.0, 1.0, r).unwrap());
        let acs = AlmostComplexStructure::standard(&p);
        (p, acs)
    }

    #[test]
    fn z_and_zbar() {
        let (p, acs) = std2(5);
        let z = ComplexField::parse(&p, "x1", "x2").unwrap();
        let zb = z.conj();
        let m = DiffMode::Exact;
        assert_eq!(holo_residual(&acs, &z, m).unwrap().sup_norm, 0.0);
        let r = holo_residual(&acs, &zb, m).unwrap();
        assert!((r.sup_norm - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(r.equations[0].sup_norm, 2.0);
        assert_eq!(antiholo_residual(&acs, &zb, m).unwrap().sup_norm, 0.0);
        assert!((antiholo_residual(&acs, &z, m).unwrap().sup_norm - 2.0 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn real_functions_are_never_holomorphic() {
        let (p, acs) = std2(5);
        let f = ComplexField::real(ScalarField::parse(&p, "x1").unwrap());
        let r = holo_residual(&acs, &f, DiffMode::Exact).unwrap();
        assert!((r.sup_norm - 2f64.sqrt()).abs() < 1e-15);
    }
}
