//! Potential forms `ω = J*du`, almost-pluriharmonic residuals and the
//! second-order operator
//!
//! ```text
//! Δ_J u = Σ A_sp ∂_s∂_p u + Σ B_p ∂_p u,
//! A_sp  = Σ_q J_q^s J_q^p + δ_sp,
//! B_p   = Σ_{s,q} J_q^s (∂_s J_q^p − ∂_q J_s^p),      J_q^p = j_cot[q][p].
//! ```
//!
//! For every `u`, `Δ_J u = Σ_{s,q} J_q^s R_sq` with `R = d(J*du)`, so
//! almost-pluriharmonic functions solve `Δ_J u = 0`.

mod solver;
mod stencil;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::calculus::{d_oneform, OneForm, TwoForm};
use crate::error::{Error, Result};
use crate::field::{DiffMode, Evaluator, MatrixField, ScalarField};
use crate::par;
use crate::report::{ResidualReport, EXACT_TOL};
use crate::structures::AlmostComplexStructure;

pub use solver::{solve_dirichlet, DirichletProblem, SolveMethod, SolveStats, Solution};
pub use stencil::{neighbor_offsets, node_coefficients, Stencil};

fn check_patch(acs: &AlmostComplexStructure, u: &ScalarField) -> Result<()> {
    if **u.patch() != **acs.patch() {
        return Err(Error::PatchMismatch);
    }
    Ok(())
}

/// `ω = J*du`, `ω_q = Σ_p j_cot[q][p] ∂_p u`.
pub fn potential_form(acs: &AlmostComplexStructure, u: &ScalarField, mode: DiffMode) -> Result<OneForm> {
    check_patch(acs, u)?;
    let grad = u.gradient(mode)?;
    let d = acs.dim();
    let j = if mode == DiffMode::Exact {
        acs.j_cot().clone()
    } else {
        acs.j_cot().sampled()?
    };
    let comps = (0..d)
        .map(|q| {
            let terms = (0..d)
                .map(|p| j.get(q, p).mul(&grad[p]))
                .collect::<Result<Vec<_>>>()?;
            ScalarField::sum(u.patch(), &terms)
        })
        .collect::<Result<Vec<_>>>()?;
    OneForm::new(comps)
}

/// `R = d(J*du)`.
///
/// In finite-difference mode interior values come from the expanded form
/// `R_sq = Σ_p (∂_s J_qp − ∂_q J_sp) ∂_p u + J_qp ∂_s∂_p u − J_sp ∂_q∂_p u`
/// with central first, second and mixed differences. Differencing the sampled
/// `ω` again would pick up the one-sided boundary formulas at nodes next to the
/// boundary and drop to first order there. Boundary nodes keep the composite value.
pub fn potential_curvature(acs: &AlmostComplexStructure, u: &ScalarField, mode: DiffMode) -> Result<TwoForm> {
    let composite = d_oneform(&potential_form(acs, u, mode)?, mode)?;
    if mode == DiffMode::Exact {
        return Ok(composite);
    }
    let patch = u.patch().clone();
    let d = acs.dim();
    let us = u.samples()?;
    let j = acs.j_cot().sampled()?;
    let mut fields = j.entries().to_vec();
    for s in 0..d {
        fields.extend(j.partial(s, DiffMode::FiniteDifference)?.entries().iter().cloned());
    }
    let nodes = patch.interior_nodes();
    let t = Evaluator::new(&fields)?.table(&nodes)?;
    let dd = d * d;
    let stride: Vec<usize> = (0..d).map(|a| patch.stride(a)).collect();
    let h: Vec<f64> = (0..d).map(|a| patch.spacing(a)).collect();
    let pairs: Vec<(usize, usize)> = composite.upper().map(|(s, q, _)| (s, q)).collect();
    let per_node = par::map_range(nodes.len(), |i| {
        let k = nodes[i];
        let row = t.row(i);
        let jv = |q: usize, p: usize| row[q * d + p];
        let dj = |s: usize, q: usize, p: usize| row[dd + s * dd + q * d + p];
        let grad: Vec<f64> = (0..d)
            .map(|p| (us[k + stride[p]] - us[k - stride[p]]) / (2.0 * h[p]))
            .collect();
        let hess = |a: usize, b: usize| {
            if a == b {
                (us[k + stride[a]] - 2.0 * us[k] + us[k - stride[a]]) / (h[a] * h[a])
            } else {
                let (sa, sb) = (stride[a], stride[b]);
                (us[k + sa + sb] + us[k - sa - sb] - us[k + sa - sb] - us[k - sa + sb]) / (4.0 * h[a] * h[b])
            }
        };
        pairs
            .iter()
            .map(|&(s, q)| {
                (0..d)
                    .map(|p| (dj(s, q, p) - dj(q, s, p)) * grad[p] + jv(q, p) * hess(s, p) - jv(s, p) * hess(q, p))
                    .sum::<f64>()
            })
            .collect::<Vec<f64>>()
    });
    let upper = composite
        .upper()
        .enumerate()
        .map(|(c, (_, _, f))| {
            let mut v = f.samples()?.as_ref().clone();
            for (i, &k) in nodes.iter().enumerate() {
                v[k] = per_node[i][c];
            }
            ScalarField::from_samples(&patch, v)
        })
        .collect::<Result<Vec<_>>>()?;
    TwoForm::from_upper(&patch, upper)
}

/// Sup over interior nodes of `|R_sq|`, `s < q`.
pub fn potential_closedness_residual(
    acs: &AlmostComplexStructure,
    u: &ScalarField,
    mode: DiffMode,
) -> Result<ResidualReport> {
    let r = potential_curvature(acs, u, mode)?;
    let names: Vec<String> = r.upper().map(|(s, q, _)| format!("R_{}{}", s + 1, q + 1)).collect();
    let fields: Vec<ScalarField> = r.upper().map(|(_, _, f)| f.clone()).collect();
    let nodes = u.patch().interior_nodes();
    let table = Evaluator::new(&fields)?.table(&nodes)?;
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    Ok(ResidualReport::from_values(
        "almost pluriharmonic: d(J*du) = 0",
        mode,
        u.patch(),
        &nodes,
        &refs,
        &table.values,
    ))
}

/// Coefficients of `Δ_J` and their discretization.
#[derive(Debug, Clone)]
pub struct EllipticOperator {
    pub mode: DiffMode,
    /// `A_sp`, symmetric.
    pub a: MatrixField,
    /// `B_p`.
    pub b: Vec<ScalarField>,
    pub stencil: Stencil,
    /// `max |B| h / λ_min(A)` over interior nodes.
    pub peclet: f64,
}

/// `A = j_cotᵀ j_cot + E`.
pub fn principal_part(acs: &AlmostComplexStructure) -> Result<MatrixField> {
    acs.j_tan()
        .mul(acs.j_cot())?
        .add(&MatrixField::identity(acs.patch(), acs.dim()))
}

/// `B_p = Σ_{s,q} J_q^s (∂_s J_q^p − ∂_q J_s^p)`.
pub fn drift(acs: &AlmostComplexStructure, mode: DiffMode) -> Result<Vec<ScalarField>> {
    let d = acs.dim();
    let j = acs.j_cot();
    let patch = acs.patch();
    if acs.is_constant() {
        return Ok(vec![ScalarField::zero(patch); d]);
    }
    let dj: Vec<MatrixField> = (0..d).map(|s| j.partial(s, mode)).collect::<Result<_>>()?;
    let base = if mode == DiffMode::Exact { j.clone() } else { j.sampled()? };
    (0..d)
        .map(|p| {
            let mut terms = Vec::with_capacity(d * d);
            for s in 0..d {
                for q in 0..d {
                    let inner = dj[s].get(q, p).sub(dj[q].get(s, p))?;
                    terms.push(base.get(q, s).mul(&inner)?);
                }
            }
            ScalarField::sum(patch, &terms)
        })
        .collect()
}

/// Builds `A`, `B` and the interior stencil.
pub fn assemble_operator(acs: &AlmostComplexStructure, mode: DiffMode) -> Result<EllipticOperator> {
    let patch = acs.patch().clone();
    patch.require_fd()?;
    let d = acs.dim();
    let a = principal_part(acs)?;
    let b = drift(acs, mode)?;
    let nodes = patch.interior_nodes();
    let at = a.evaluator()?.table(&nodes)?;
    let bt = Evaluator::new(&b)?.table(&nodes)?;
    let stencil = Stencil::build(&patch, nodes.clone(), &at.values, &bt.values);
    let h = patch.max_spacing();
    let peclet = par::map_range(nodes.len(), |i| {
        let am = DMatrix::from_row_slice(d, d, at.row(i));
        let lmin = am.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        let bn = bt.row(i).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        bn * h / lmin
    })
    .into_iter()
    .fold(0.0, f64::max);
    Ok(EllipticOperator {
        mode,
        a,
        b,
        stencil,
        peclet,
    })
}

impl EllipticOperator {
    /// Stencil applied at interior nodes; boundary nodes carry 0.
    pub fn apply(&self, u: &ScalarField) -> Result<ScalarField> {
        let patch = self.a.patch();
        if **u.patch() != **patch {
            return Err(Error::PatchMismatch);
        }
        let values = self.stencil.apply(&u.samples()?);
        let mut full = vec![0.0; patch.len()];
        for (&k, v) in self.stencil.nodes.iter().zip(values) {
            full[k] = v;
        }
        ScalarField::from_samples(patch, full)
    }

    /// `|B| h / λ_min(A) > 1`: the discrete maximum principle is not guaranteed.
    pub fn peclet_warning(&self) -> bool {
        self.peclet > 1.0
    }
}

/// `Δ_J u` evaluated at interior nodes. Exact mode combines symbolic second
/// derivatives with `A` and `B`; finite-difference mode applies the stencil.
pub fn operator_values(
    acs: &AlmostComplexStructure,
    op: &EllipticOperator,
    u: &ScalarField,
    mode: DiffMode,
) -> Result<Vec<f64>> {
    check_patch(acs, u)?;
    match mode {
        DiffMode::FiniteDifference => Ok(op.stencil.apply(&u.samples()?)),
        DiffMode::Exact => {
            let d = acs.dim();
            let mut fields = op.a.entries().to_vec();
            fields.extend(op.b.iter().cloned());
            let grad = u.gradient(DiffMode::Exact)?;
            for g in &grad {
                for p in 0..d {
                    fields.push(g.partial(p, DiffMode::Exact)?);
                }
            }
            fields.extend(grad);
            let nodes = &op.stencil.nodes;
            let t = Evaluator::new(&fields)?.table(nodes)?;
            let dd = d * d;
            Ok(par::map_range(nodes.len(), |i| {
                let r = t.row(i);
                let a = &r[..dd];
                let b = &r[dd..dd + d];
                let hess = &r[dd + d..2 * dd + d];
                let g = &r[2 * dd + d..];
                let mut v = 0.0;
                for s in 0..d {
                    for p in 0..d {
                        v += a[s * d + p] * hess[s * d + p];
                    }
                    v += b[s] * g[s];
                }
                v
            }))
        }
    }
}

/// `Σ_{s,q} j_cot[q][s] R_sq` at interior nodes.
pub fn contraction_values(
    acs: &AlmostComplexStructure,
    u: &ScalarField,
    mode: DiffMode,
) -> Result<Vec<f64>> {
    let d = acs.dim();
    let r = potential_curvature(acs, u, mode)?;
    let mut fields = acs.j_cot().entries().to_vec();
    fields.extend(r.upper().map(|(_, _, f)| f.clone()));
    let nodes = u.patch().interior_nodes();
    let t = Evaluator::new(&fields)?.table(&nodes)?;
    Ok(par::map_range(nodes.len(), |i| {
        let row = t.row(i);
        let j = &row[..d * d];
        let mut up = row[d * d..].iter();
        let mut v = 0.0;
        for s in 0..d {
            for q in s + 1..d {
                let rsq = *up.next().expect("upper triangle");
                // J_q^s R_sq + J_s^q R_qs = (j[q][s] − j[s][q]) R_sq
                v += (j[q * d + s] - j[s * d + q]) * rsq;
            }
        }
        v
    }))
}

/// `sup |Δ_J u − Σ J_q^s R_sq|` over interior nodes.
pub fn contraction_identity_residual(
    acs: &AlmostComplexStructure,
    u: &ScalarField,
    mode: DiffMode,
) -> Result<ResidualReport> {
    if mode == DiffMode::Exact && !(acs.is_exact() && u.is_exact()) {
        return Err(Error::ModeUnavailable(
            "contraction identity in exact mode needs expression-backed J and u".into(),
        ));
    }
    let op = assemble_operator(acs, mode)?;
    let lhs = operator_values(acs, &op, u, mode)?;
    let rhs = contraction_values(acs, u, mode)?;
    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    Ok(ResidualReport::scalar(
        "contraction identity: Delta_J u = sum J_q^s R_sq",
        mode,
        u.patch(),
        &op.stencil.nodes,
        "Delta_J u - sum J R",
        &diff,
    ))
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TheoremReport {
    pub anchor: String,
    pub mode: DiffMode,
    pub closedness: ResidualReport,
    /// `sup |Δ_J u|` over interior nodes.
    pub operator_sup: f64,
    /// `sup |Δ_J u − Σ J R|`.
    pub identity_residual: f64,
    /// `d(d−1) · max|J| · closedness + tolerance`.
    pub bound: f64,
    pub bound_holds: bool,
}

/// Closedness of `J*du` together with `|Δ_J u|` and the contraction bound.
pub fn theorem_check(
    acs: &AlmostComplexStructure,
    u: &ScalarField,
    mode: DiffMode,
    tol: f64,
) -> Result<TheoremReport> {
    let closedness = potential_closedness_residual(acs, u, mode)?;
    let op = assemble_operator(acs, mode)?;
    let lhs = operator_values(acs, &op, u, mode)?;
    let rhs = contraction_values(acs, u, mode)?;
    let operator_sup = lhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let identity_residual = lhs
        .iter()
        .zip(&rhs)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let jmax = acs
        .j_cot()
        .at_nodes(&op.stencil.nodes)?
        .iter()
        .map(crate::linalg::max_abs)
        .fold(0.0, f64::max);
    let d = acs.dim() as f64;
    let bound = d * (d - 1.0) * jmax * closedness.sup_norm + tol;
    Ok(TheoremReport {
        anchor: "almost pluriharmonic functions satisfy Delta_J u = 0".into(),
        mode,
        operator_sup,
        identity_residual,
        bound_holds: operator_sup <= bound,
        bound,
        closedness,
    })
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EllipticityReport {
    pub anchor: String,
    pub samples: usize,
    /// Smallest `ξᵀAξ` over the random samples.
    pub min_value: f64,
    pub min_node: Vec<usize>,
    pub min_xi: Vec<f64>,
    /// Smallest eigenvalue of `A` over all nodes.
    pub min_eigenvalue: f64,
    /// Largest `|ξᵀAξ − |j_cot ξ|² − |ξ|²|`.
    pub identity_residual: f64,
    pub passes: bool,
}

/// Samples `(node, unit ξ)` pairs and checks `ξᵀAξ ≥ 1` and
/// `ξᵀAξ = |j_cot ξ|² + |ξ|²`. Violations are returned as errors.
pub fn ellipticity_certificate(
    acs: &AlmostComplexStructure,
    op: &EllipticOperator,
    samples: usize,
    seed: u64,
) -> Result<EllipticityReport> {
    let patch = acs.patch().clone();
    let d = acs.dim();
    let nodes = patch.all_nodes();
    let mut fields = op.a.entries().to_vec();
    fields.extend(acs.j_cot().entries().iter().cloned());
    let t = Evaluator::new(&fields)?.table(&nodes)?;
    let dd = d * d;
    let min_eigenvalue = par::map_range(nodes.len(), |i| {
        DMatrix::from_row_slice(d, d, &t.row(i)[..dd])
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    })
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut min_value = f64::INFINITY;
    let mut min_node = 0;
    let mut min_xi = vec![0.0; d];
    let mut identity_residual = 0.0f64;
    for _ in 0..samples {
        let i = rng.gen_range(0..nodes.len());
        let xi = random_unit(&mut rng, d);
        let row = t.row(i);
        let (a, j) = (&row[..dd], &row[dd..]);
        let mut q = 0.0;
        let mut jx2 = 0.0;
        for s in 0..d {
            let mut jx = 0.0;
            for p in 0..d {
                q += xi[s] * a[s * d + p] * xi[p];
                jx += j[s * d + p] * xi[p];
            }
            jx2 += jx * jx;
        }
        identity_residual = identity_residual.max((q - jx2 - 1.0).abs());
        if q < min_value {
            min_value = q;
            min_node = nodes[i];
            min_xi = xi;
        }
    }
    let passes = min_value >= 1.0 - EXACT_TOL && identity_residual <= EXACT_TOL * (1.0 + min_value.abs());
    if min_value < 1.0 - EXACT_TOL {
        return Err(Error::EllipticityViolated {
            value: min_value,
            node: patch.multi_index(min_node),
            xi: min_xi,
        });
    }
    Ok(EllipticityReport {
        anchor: "ellipticity: xi^T A xi >= |xi|^2".into(),
        samples,
        min_value,
        min_node: patch.multi_index(min_node),
        min_xi,
        min_eigenvalue,
        identity_residual,
        passes,
    })
}

fn random_unit<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
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
    fn closedness_of_harmonic_and_square() {
        let (p, acs) = std2(7);
        let h = ScalarField::parse(&p, "x1^2 - x2^2").unwrap();
        assert_eq!(
            potential_closedness_residual(&acs, &h, DiffMode::Exact).unwrap().sup_norm,
            0.0
        );
        let sq = ScalarField::parse(&p, "x1^2").unwrap();
        assert_eq!(
            potential_closedness_residual(&acs, &sq, DiffMode::Exact).unwrap().sup_norm,
            2.0
        );
        let r = potential_curvature(&acs, &sq, DiffMode::Exact).unwrap();
        assert_eq!(r.get(0, 1).as_constant(), Some(-2.0));
    }

    #[test]
    fn standard_operator_is_twice_laplacian() {
        let (p, acs) = std2(9);
        let op = assemble_operator(&acs, DiffMode::Exact).unwrap();
        let u = ScalarField::parse(&p, "x1^2").unwrap();
        let v = op.stencil.apply(&u.samples().unwrap());
        assert!(v.iter().all(|&x| (x - 4.0).abs() < 1e-10));
        assert!(op.stencil.is_monotone());
        assert_eq!(op.peclet, 0.0);
    }

    #[test]
    fn theorem_on_square() {
        let (p, acs) = std2(7);
        let u = ScalarField::parse(&p, "x1^2").unwrap();
        let t = theorem_check(&acs, &u, DiffMode::Exact, EXACT_TOL).unwrap();
        assert_eq!(t.closedness.sup_norm, 2.0);
        assert_eq!(t.operator_sup, 4.0);
        assert_eq!(t.identity_residual, 0.0);
        assert!(t.bound_holds);
    }
}
