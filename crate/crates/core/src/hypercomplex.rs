//! Hyperholomorphic residuals for the pair `(J, K)` and the coupled potential
//! equation `d(J*du) + d(K*dζ) = 0`.
//!
//! `F = u + iv + jζ + kη` is J-hyperholomorphic when `dF∘J = S∘dF`. With
//! `W = [∇u, ∇v, ∇ζ, ∇η]` (gradients as columns) this reads
//! `j_cot·W = W·S`, whose columns are the real systems of `f = u + iv`
//! almost holomorphic and `φ = ζ + iη` almost antiholomorphic. The K-version
//! is `k_cot·W = W·T`, i.e. `K*du = −dζ`, `K*dv = −dη`, `K*dζ = du`,
//! `K*dη = dv`: `u + iζ` and `v + iη` are K-almost holomorphic.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::elliptic::{assemble_operator, operator_values, potential_curvature};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::{ComplexField, DiffMode, Evaluator, ScalarField};
use crate::grid::Patch;
use crate::holomorphy::{antiholo_residual, holo_residual};
use crate::par;
use crate::report::ResidualReport;
use crate::structures::{quaternion_s, quaternion_t, AlmostComplexStructure, HypercomplexStructure};

/// Quaternion `a0 + a1 i + a2 j + a3 k`.
pub type Quaternion = [f64; 4];

/// Hamilton product on any ring-like component type.
fn hamilton<T>(a: &[T; 4], b: &[T; 4], mul: impl Fn(&T, &T) -> T, add: impl Fn(T, T) -> T, sub: impl Fn(T, T) -> T) -> [T; 4] {
    let m = |i: usize, j: usize| mul(&a[i], &b[j]);
    [
        sub(sub(sub(m(0, 0), m(1, 1)), m(2, 2)), m(3, 3)),
        sub(add(add(m(0, 1), m(1, 0)), m(2, 3)), m(3, 2)),
        add(add(sub(m(0, 2), m(1, 3)), m(2, 0)), m(3, 1)),
        add(sub(add(m(0, 3), m(1, 2)), m(2, 1)), m(3, 0)),
    ]
}

pub fn qmul(a: &Quaternion, b: &Quaternion) -> Quaternion {
    hamilton(a, b, |x, y| x * y, |x, y| x + y, |x, y| x - y)
}

fn qmul_expr(a: &[Expr; 4], b: &[Expr; 4]) -> [Expr; 4] {
    hamilton(a, b, |x, y| x * y, |x, y| &x + &y, |x, y| &x - &y)
}

/// `F = u + iv + jζ + kη` on a patch of dimension `4n`.
#[derive(Debug, Clone)]
pub struct QuaternionFunction {
    pub u: ScalarField,
    pub v: ScalarField,
    pub zeta: ScalarField,
    pub eta: ScalarField,
}

impl QuaternionFunction {
    pub fn new(u: ScalarField, v: ScalarField, zeta: ScalarField, eta: ScalarField) -> Result<QuaternionFunction> {
        let patch = u.patch().clone();
        if !patch.dim().is_multiple_of(4) {
            return Err(Error::DimensionMismatch(format!(
                "quaternion functions need a patch of dimension 4n, got {}",
                patch.dim()
            )));
        }
        for f in [&v, &zeta, &eta] {
            if **f.patch() != *patch {
                return Err(Error::PatchMismatch);
            }
        }
        Ok(QuaternionFunction { u, v, zeta, eta })
    }

    pub fn parse(patch: &Arc<Patch>, comps: [&str; 4]) -> Result<QuaternionFunction> {
        let [a, b, c, d] = comps.map(|s| ScalarField::parse(patch, s));
        QuaternionFunction::new(a?, b?, c?, d?)
    }

    fn from_exprs(patch: &Arc<Patch>, e: [Expr; 4]) -> Result<QuaternionFunction> {
        let [a, b, c, d] = e.map(|e| ScalarField::from_expr(patch, e));
        QuaternionFunction::new(a?, b?, c?, d?)
    }

    /// The quaternion variable `q = x1 + i x2 + j x3 + k x4` of block `block`.
    fn variable(block: usize) -> [Expr; 4] {
        [0, 1, 2, 3].map(|c| Expr::var(4 * block + c))
    }

    /// `q ↦ a q + b` on the first quaternion block.
    pub fn affine(patch: &Arc<Patch>, a: Quaternion, b: Quaternion) -> Result<QuaternionFunction> {
        let q = Self::variable(0);
        let prod = qmul_expr(&a.map(Expr::num), &q);
        let mut i = 0;
        let out = prod.map(|e| {
            let r = &e + &Expr::num(b[i]);
            i += 1;
            r
        });
        Self::from_exprs(patch, out)
    }

    pub fn identity(patch: &Arc<Patch>) -> Result<QuaternionFunction> {
        Self::affine(patch, [1.0, 0.0, 0.0, 0.0], [0.0; 4])
    }

    /// `q ↦ q̄`.
    pub fn conjugate(patch: &Arc<Patch>) -> Result<QuaternionFunction> {
        let [a, b, c, d] = Self::variable(0);
        Self::from_exprs(patch, [a, -b, -c, -d])
    }

    /// `q ↦ q²`.
    pub fn square(patch: &Arc<Patch>) -> Result<QuaternionFunction> {
        let q = Self::variable(0);
        Self::from_exprs(patch, qmul_expr(&q, &q))
    }

    pub fn patch(&self) -> &Arc<Patch> {
        self.u.patch()
    }

    pub fn components(&self) -> [&ScalarField; 4] {
        [&self.u, &self.v, &self.zeta, &self.eta]
    }

    /// `f = u + iv`.
    pub fn f(&self) -> ComplexField {
        ComplexField { re: self.u.clone(), im: self.v.clone() }
    }

    /// `φ = ζ + iη`.
    pub fn phi(&self) -> ComplexField {
        ComplexField { re: self.zeta.clone(), im: self.eta.clone() }
    }
}

fn check(h: &HypercomplexStructure, f: &QuaternionFunction) -> Result<()> {
    if f.patch().dim() != h.dim() {
        return Err(Error::DimensionMismatch(format!(
            "quaternion function on dimension {}, structure of size {}",
            f.patch().dim(),
            h.dim()
        )));
    }
    if **f.patch() != **h.patch() {
        return Err(Error::PatchMismatch);
    }
    Ok(())
}

/// Sup over interior nodes of the entries of `j_cot·W − W·M`, one equation per
/// column of `M` (4×4).
pub fn matrix_condition_residual(
    acs: &AlmostComplexStructure,
    f: &QuaternionFunction,
    m: &DMatrix<f64>,
    mode: DiffMode,
    anchor: &str,
) -> Result<ResidualReport> {
    let d = acs.dim();
    if f.patch().dim() != d || **f.patch() != **acs.patch() {
        return Err(Error::PatchMismatch);
    }
    let mut fields = acs.j_cot().entries().to_vec();
    for c in f.components() {
        fields.extend(c.gradient(mode)?);
    }
    let patch = acs.patch().clone();
    let nodes = patch.interior_nodes();
    let t = Evaluator::new(&fields)?.table(&nodes)?;
    let m = m.clone();
    let values = par::map_range(nodes.len(), |i| {
        let r = t.row(i);
        let j = DMatrix::from_row_slice(d, d, &r[..d * d]);
        // W[k][a] = ∂_k F^a
        let w = DMatrix::from_fn(d, 4, |k, a| r[d * d + a * d + k]);
        let diff = &j * &w - &w * &m;
        (0..4)
            .map(|a| diff.column(a).iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
            .collect::<Vec<_>>()
    })
    .concat();
    Ok(ResidualReport::from_values(
        anchor,
        mode,
        &patch,
        &nodes,
        &["column 1", "column 2", "column 3", "column 4"],
        &values,
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct HyperReport {
    /// Worse of the two complex conditions.
    pub residual: ResidualReport,
    pub f_part: ResidualReport,
    pub phi_part: ResidualReport,
    /// The same condition in matrix form `j_cot·W − W·S`.
    pub matrix_form: ResidualReport,
    /// `|max real-equation residual − matrix-form residual|`; zero up to
    /// rounding since both list the same real equations.
    pub route_gap: f64,
}

fn max_equation(r: &ResidualReport) -> f64 {
    r.equations.iter().map(|e| e.sup_norm).fold(0.0, f64::max)
}

/// J-hyperholomorphy: `f` almost holomorphic and `φ` almost antiholomorphic.
pub fn j_hyperholo_residual(h: &HypercomplexStructure, f: &QuaternionFunction, mode: DiffMode) -> Result<HyperReport> {
    check(h, f)?;
    let f_part = holo_residual(&h.j, &f.f(), mode)?;
    let phi_part = antiholo_residual(&h.j, &f.phi(), mode)?;
    let residual = ResidualReport::merge("J-hyperholomorphic: dF∘J = S∘dF", &[f_part.clone(), phi_part.clone()]);
    let matrix_form = matrix_condition_residual(&h.j, f, &quaternion_s(), mode, "J-hyperholomorphic, matrix form")?;
    let real = max_equation(&f_part).max(max_equation(&phi_part));
    Ok(HyperReport {
        route_gap: (real - matrix_form.sup_norm).abs(),
        residual,
        f_part,
        phi_part,
        matrix_form,
    })
}

/// Real 1-form residuals `K*dα − c·dβ` at interior nodes.
fn one_form_system(
    acs: &AlmostComplexStructure,
    g: &QuaternionFunction,
    system: &[(usize, f64, usize, &str)],
    mode: DiffMode,
    anchor: &str,
) -> Result<ResidualReport> {
    let d = acs.dim();
    let comps = g.components();
    let mut fields = acs.j_cot().entries().to_vec();
    for c in comps {
        fields.extend(c.gradient(mode)?);
    }
    let patch = acs.patch().clone();
    let nodes = patch.interior_nodes();
    let t = Evaluator::new(&fields)?.table(&nodes)?;
    let values = par::map_range(nodes.len(), |i| {
        let r = t.row(i);
        let j = &r[..d * d];
        let grad = |a: usize| &r[d * d + a * d..d * d + (a + 1) * d];
        system
            .iter()
            .map(|&(alpha, c, beta, _)| {
                let (ga, gb) = (grad(alpha), grad(beta));
                (0..d)
                    .map(|q| {
                        let jw: f64 = (0..d).map(|p| j[q * d + p] * ga[p]).sum();
                        (jw - c * gb[q]).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect::<Vec<_>>()
    })
    .concat();
    let names: Vec<&str> = system.iter().map(|s| s.3).collect();
    Ok(ResidualReport::from_values(anchor, mode, &patch, &nodes, &names, &values))
}

/// Real system of `dG∘K = T∘dG` on `G = G⁰ + iG¹ + jG² + kG³`.
const K_SYSTEM: [(usize, f64, usize, &str); 4] = [
    (0, -1.0, 2, "K*dG0 + dG2"),
    (1, -1.0, 3, "K*dG1 + dG3"),
    (2, 1.0, 0, "K*dG2 - dG0"),
    (3, 1.0, 1, "K*dG3 - dG1"),
];

/// The translated system as commonly printed for the i-splitting
/// `G = (u′ + jζ′) + (v′ − jη′)i`, i.e. `u′ = G⁰, v′ = G¹, ζ′ = G², η′ = G³`.
/// It is not implied by the matrix condition (it fails for `G(q) = q`) and is
/// reported for information only.
const K_SYSTEM_PRINTED: [(usize, f64, usize, &str); 4] = [
    (0, 1.0, 1, "K*du' - dv'"),
    (2, -1.0, 3, "K*dzeta' + deta'"),
    (1, -1.0, 0, "K*dv' + du'"),
    (3, -1.0, 2, "K*deta' + dzeta'"),
];

#[derive(Debug, Clone, Serialize)]
pub struct KHyperReport {
    /// The four real equations of `k_cot·W = W·T`.
    pub residual: ResidualReport,
    pub matrix_form: ResidualReport,
    pub route_gap: f64,
}

/// K-hyperholomorphy via its real 1-form system.
pub fn k_hyperholo_residual(h: &HypercomplexStructure, g: &QuaternionFunction, mode: DiffMode) -> Result<KHyperReport> {
    check(h, g)?;
    let residual = one_form_system(&h.k, g, &K_SYSTEM, mode, "K-hyperholomorphic: dG∘K = T∘dG")?;
    let matrix_form = matrix_condition_residual(&h.k, g, &quaternion_t(), mode, "K-hyperholomorphic, matrix form")?;
    Ok(KHyperReport {
        route_gap: (residual.sup_norm - matrix_form.sup_norm).abs(),
        residual,
        matrix_form,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct KTranslationReport {
    pub precondition: f64,
    /// `G⁰ + iG²` K-almost holomorphic.
    pub g_holomorphic: ResidualReport,
    /// `G¹ − iG³` K-almost antiholomorphic.
    pub psi_antiholomorphic: ResidualReport,
    /// Condition factor of the change of splitting (a signed permutation).
    pub kappa: f64,
    pub passes: bool,
    /// Informational: the printed translated system.
    pub printed_system: ResidualReport,
    /// Informational: `u′ + iv′` J-almost antiholomorphic.
    pub printed_j_antiholo: ResidualReport,
    /// Informational: `ζ′ + iη′` J-almost holomorphic.
    pub printed_j_holo: ResidualReport,
}

/// Consistency of the i-splitting translation for a K-hyperholomorphic `G`.
/// Fails with [`Error::Precondition`] when `G` is not K-hyperholomorphic
/// within `tol`.
pub fn k_translation_consistency(
    h: &HypercomplexStructure,
    g: &QuaternionFunction,
    mode: DiffMode,
    tol: f64,
) -> Result<KTranslationReport> {
    let pre = k_hyperholo_residual(h, g, mode)?;
    if pre.residual.sup_norm > tol {
        return Err(Error::Precondition(format!(
            "function is not K-hyperholomorphic (residual {:.3e})",
            pre.residual.sup_norm
        )));
    }
    let gc = ComplexField { re: g.u.clone(), im: g.zeta.clone() };
    let psi = ComplexField { re: g.v.clone(), im: g.eta.neg() };
    let g_holomorphic = holo_residual(&h.k, &gc, mode)?;
    let psi_antiholomorphic = antiholo_residual(&h.k, &psi, mode)?;
    let kappa = 1.0;
    let passes = g_holomorphic.sup_norm <= kappa * tol && psi_antiholomorphic.sup_norm <= kappa * tol;
    Ok(KTranslationReport {
        precondition: pre.residual.sup_norm,
        kappa,
        passes,
        printed_system: one_form_system(&h.k, g, &K_SYSTEM_PRINTED, mode, "printed translated K-system")?,
        printed_j_antiholo: antiholo_residual(&h.j, &g.f(), mode)?,
        printed_j_holo: holo_residual(&h.j, &g.phi(), mode)?,
        g_holomorphic,
        psi_antiholomorphic,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HyperPotentialReport {
    /// Components of `d(J*du) + d(K*dζ)`.
    pub coupled: ResidualReport,
    /// `d(J*du)`.
    pub j_part: ResidualReport,
    /// `d(K*dζ)`.
    pub k_part: ResidualReport,
    /// `sup |Δ_J u|` over interior nodes.
    pub delta_j_u: f64,
    /// `sup |Δ_K ζ|` over interior nodes.
    pub delta_k_zeta: f64,
}

/// Coupled potential residual and the separate pieces.
pub fn hyper_potential_residual(
    h: &HypercomplexStructure,
    u: &ScalarField,
    zeta: &ScalarField,
    mode: DiffMode,
) -> Result<HyperPotentialReport> {
    if u.patch().dim() != h.dim() || **u.patch() != **h.patch() || **zeta.patch() != **h.patch() {
        return Err(Error::PatchMismatch);
    }
    let rj = potential_curvature(&h.j, u, mode)?;
    let rk = potential_curvature(&h.k, zeta, mode)?;
    let patch = h.patch().clone();
    let nodes = patch.interior_nodes();
    let mut names = Vec::new();
    let mut fields = Vec::new();
    for ((s, q, a), (_, _, b)) in rj.upper().zip(rk.upper()) {
        names.push(format!("R_{}{}", s + 1, q + 1));
        fields.push(a.add(b)?);
        fields.push(a.clone());
        fields.push(b.clone());
    }
    let t = Evaluator::new(&fields)?.table(&nodes)?;
    let m = names.len();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let part = |which: usize, anchor: &str| {
        let values: Vec<f64> = (0..nodes.len())
            .flat_map(|i| {
                let r = t.row(i);
                (0..m).map(move |e| r[3 * e + which])
            })
            .collect();
        ResidualReport::from_values(anchor, mode, &patch, &nodes, &refs, &values)
    };
    let sup = |v: Vec<f64>| v.into_iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let op_mode = if mode == DiffMode::Exact && !(h.j.is_exact() && u.is_exact()) {
        DiffMode::FiniteDifference
    } else {
        mode
    };
    let opj = assemble_operator(&h.j, op_mode)?;
    let opk = assemble_operator(&h.k, op_mode)?;
    Ok(HyperPotentialReport {
        coupled: part(0, "coupled potential: d(J*du) + d(K*dzeta) = 0"),
        j_part: part(1, "almost pluriharmonic for J: d(J*du) = 0"),
        k_part: part(2, "almost pluriharmonic for K: d(K*dzeta) = 0"),
        delta_j_u: sup(operator_values(&h.j, &opj, u, op_mode)?),
        delta_k_zeta: sup(operator_values(&h.k, &opk, zeta, op_mode)?),
    })
}

/// `(G⁻¹ S G, G⁻¹ T G)` blockwise for a constant invertible `G`; the map
/// `x ↦ (G⁻¹)ᵀ x` restricted to the first four outputs is hyperholomorphic
/// for it.
pub fn conjugated_flat(patch: &Arc<Patch>, g: &DMatrix<f64>) -> Result<HypercomplexStructure> {
    let dim = patch.dim();
    let ginv = g.clone().try_inverse().ok_or_else(|| Error::Singular {
        what: "conjugating matrix".into(),
        node: vec![],
        hint: None,
    })?;
    let s = crate::structures::block_diag4(&quaternion_s(), dim);
    let t = crate::structures::block_diag4(&quaternion_t(), dim);
    let mk = |m: &DMatrix<f64>| {
        AlmostComplexStructure::from_cotangent(crate::field::MatrixField::from_constant(patch, &(&ginv * m * g)))
    };
    HypercomplexStructure::new(mk(&s)?, mk(&t)?)
}

/// `F^a = Σ_k (G⁻¹)[k][a] x_k` for `a < 4`: hyperholomorphic for [`conjugated_flat`].
pub fn conjugated_identity(patch: &Arc<Patch>, g: &DMatrix<f64>) -> Result<QuaternionFunction> {
    let ginv = g.clone().try_inverse().ok_or_else(|| Error::Singular {
        what: "conjugating matrix".into(),
        node: vec![],
        hint: None,
    })?;
    let d = patch.dim();
    let comp = |a: usize| Expr::sum(&(0..d).map(|k| Expr::var(k) * ginv[(k, a)]).collect::<Vec<_>>());
    QuaternionFunction::from_exprs(patch, [comp(0), comp(1), comp(2), comp(3)])
}

/// Right-multiplication matrix `b S + c T + d S T` paired with the twistor
/// structure `b J + c K + d JK`.
pub fn twistor_matrix(b: f64, c: f64, d: f64) -> DMatrix<f64> {
    let (s, t) = (quaternion_s(), quaternion_t());
    &s * b + &t * c + (&s * &t) * d
}
