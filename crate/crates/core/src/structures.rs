//! Almost-complex structures, the (P,Q) parametrization, normalization at a
//! base point, quaternionic matrices and twistor combinations.
//!
//! Conventions: `j_tan` acts on vector components, `(JX)^k = Σ_j j_tan[k][j] X^j`;
//! `j_cot = j_tanᵀ` acts on covector coefficients, so the coefficient vector of
//! `J*ω` is `j_cot · ω`. The standard structure has `j_cot = [[0, 1], [-1, 0]]`
//! on every coordinate pair, which makes `x1 + i x2` holomorphic.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{DiffMode, MatrixField, ScalarField};
use crate::grid::Patch;
use crate::linalg::{self, inf_norm, C64};
use crate::par;

/// Default validation tolerance for `‖J² + E‖∞`.
pub const ACS_TOL: f64 = 1e-8;

/// Worst value of `‖M(x)² + E‖∞` over all grid nodes, with its node.
pub fn square_residual(m: &MatrixField) -> Result<(f64, usize)> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch("structure matrix is not square".into()));
    }
    let n = m.rows();
    let nodes = m.patch().all_nodes();
    let values = m.at_nodes(&nodes)?;
    let res = par::map_slice(&values, |v| inf_norm(&(v * v + DMatrix::identity(n, n))));
    Ok(worst_of(&nodes, &res))
}

fn worst_of(nodes: &[usize], values: &[f64]) -> (f64, usize) {
    let mut worst = (0.0, nodes[0]);
    for (&k, &v) in nodes.iter().zip(values) {
        if v > worst.0 || v.is_nan() {
            worst = (v, k);
        }
    }
    worst
}

#[derive(Debug, Clone)]
pub struct AlmostComplexStructure {
    j_cot: MatrixField,
    j_tan: MatrixField,
    acs_residual: f64,
    worst_node: Vec<usize>,
}

/// Summary of a validation run.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ValidationReport {
    pub anchor: String,
    pub dim: usize,
    pub acs_residual: f64,
    pub worst_node: Vec<usize>,
    pub tolerance: f64,
    pub valid: bool,
}

impl AlmostComplexStructure {
    /// Validates a cotangent matrix field with the default tolerance.
    pub fn from_cotangent(j_cot: MatrixField) -> Result<AlmostComplexStructure> {
        AlmostComplexStructure::from_cotangent_with_tol(j_cot, ACS_TOL)
    }

    pub fn from_cotangent_with_tol(j_cot: MatrixField, tol: f64) -> Result<AlmostComplexStructure> {
        let report = validation_report(&j_cot, tol)?;
        if !report.valid {
            return Err(Error::InvalidStructure {
                residual: report.acs_residual,
                node: report.worst_node,
            });
        }
        Ok(AlmostComplexStructure {
            j_tan: j_cot.transpose(),
            j_cot,
            acs_residual: report.acs_residual,
            worst_node: report.worst_node,
        })
    }

    /// Validates a tangent matrix field.
    pub fn from_tangent(j_tan: MatrixField) -> Result<AlmostComplexStructure> {
        AlmostComplexStructure::from_cotangent(j_tan.transpose())
    }

    /// `j_cot = [[0, 1], [-1, 0]]` on every coordinate pair.
    pub fn standard(patch: &Arc<Patch>) -> AlmostComplexStructure {
        let m = standard_cotangent(patch.dim());
        AlmostComplexStructure {
            j_cot: MatrixField::from_constant(patch, &m),
            j_tan: MatrixField::from_constant(patch, &m.transpose()),
            acs_residual: 0.0,
            worst_node: vec![0; patch.dim()],
        }
    }

    pub fn patch(&self) -> &Arc<Patch> {
        self.j_cot.patch()
    }

    pub fn dim(&self) -> usize {
        self.j_cot.rows()
    }

    pub fn dim_half(&self) -> usize {
        self.dim() / 2
    }

    pub fn j_cot(&self) -> &MatrixField {
        &self.j_cot
    }

    pub fn j_tan(&self) -> &MatrixField {
        &self.j_tan
    }

    pub fn acs_residual(&self) -> f64 {
        self.acs_residual
    }

    pub fn worst_node(&self) -> &[usize] {
        &self.worst_node
    }

    pub fn is_exact(&self) -> bool {
        self.j_cot.is_exact()
    }

    pub fn is_constant(&self) -> bool {
        self.j_cot.is_constant()
    }

    /// Exact when the matrix entries are expressions, finite differences otherwise.
    pub fn preferred_mode(&self) -> DiffMode {
        if self.is_exact() {
            DiffMode::Exact
        } else {
            DiffMode::FiniteDifference
        }
    }

    /// Same structure on a different patch (entries must be expression-backed).
    pub fn on_patch(&self, patch: &Arc<Patch>) -> Result<AlmostComplexStructure> {
        let entries = self
            .j_cot
            .entries()
            .iter()
            .map(|e| {
                e.expr()
                    .cloned()
                    .ok_or_else(|| Error::ModeUnavailable("sample-backed structure".into()))
                    .and_then(|x| ScalarField::from_expr(patch, x))
            })
            .collect::<Result<Vec<_>>>()?;
        AlmostComplexStructure::from_cotangent(MatrixField::new(self.dim(), self.dim(), entries)?)
    }

    pub fn validation(&self) -> ValidationReport {
        ValidationReport {
            anchor: "almost-complex structure J^2 = -E".into(),
            dim: self.dim(),
            acs_residual: self.acs_residual,
            worst_node: self.worst_node.clone(),
            tolerance: ACS_TOL,
            valid: true,
        }
    }
}

/// `‖J²+E‖∞` over the grid for a candidate cotangent matrix, without failing.
pub fn validation_report(j_cot: &MatrixField, tol: f64) -> Result<ValidationReport> {
    let dim = j_cot.rows();
    if !j_cot.is_square() || !dim.is_multiple_of(2) {
        return Err(Error::DimensionMismatch(format!(
            "structure matrix must be square of even size, got {}x{}",
            j_cot.rows(),
            j_cot.cols()
        )));
    }
    if dim != j_cot.patch().dim() {
        return Err(Error::DimensionMismatch(format!(
            "{dim}x{dim} structure on a {}-dimensional patch",
            j_cot.patch().dim()
        )));
    }
    let (residual, node) = square_residual(j_cot)?;
    Ok(ValidationReport {
        anchor: "almost-complex structure J^2 = -E".into(),
        dim,
        acs_residual: residual,
        worst_node: j_cot.patch().multi_index(node),
        tolerance: tol,
        valid: residual <= tol,
    })
}

/// Block-diagonal `[[0, 1], [-1, 0]]` of size `dim`.
pub fn standard_cotangent(dim: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    for p in 0..dim / 2 {
        m[(2 * p, 2 * p + 1)] = 1.0;
        m[(2 * p + 1, 2 * p)] = -1.0;
    }
    m
}

/// `[[0, E], [-E, 0]]`, the normalized form.
pub fn normalized_form(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(i, n + i)] = 1.0;
        m[(n + i, i)] = -1.0;
    }
    m
}

/// The moduli pair of the reconstruction rule.
#[derive(Debug, Clone)]
pub struct PqPair {
    p: MatrixField,
    q: MatrixField,
    q_condition: f64,
}

impl PqPair {
    pub fn new(p: MatrixField, q: MatrixField) -> Result<PqPair> {
        if !p.is_square() || !q.is_square() || p.rows() != q.rows() {
            return Err(Error::DimensionMismatch("P and Q must be square of equal size".into()));
        }
        if 2 * p.rows() != p.patch().dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} blocks on a {}-dimensional patch",
                p.rows(),
                p.rows(),
                p.patch().dim()
            )));
        }
        if **p.patch() != **q.patch() {
            return Err(Error::PatchMismatch);
        }
        let q_condition = linalg::check_invertible(&q, &q.patch().all_nodes(), "Q")?;
        Ok(PqPair { p, q, q_condition })
    }

    pub fn p(&self) -> &MatrixField {
        &self.p
    }

    pub fn q(&self) -> &MatrixField {
        &self.q
    }

    pub fn q_condition(&self) -> f64 {
        self.q_condition
    }

    pub fn n(&self) -> usize {
        self.p.rows()
    }

    pub fn patch(&self) -> &Arc<Patch> {
        self.p.patch()
    }
}

/// Rule (*): `j_cot = [[-PQ⁻¹, -PQ⁻¹P - Q], [Q⁻¹, Q⁻¹P]]`.
pub fn reconstruct_cotangent(pq: &PqPair) -> Result<MatrixField> {
    let qi = linalg::inverse_field(&pq.q, "Q")?;
    let pqi = pq.p.mul(&qi)?;
    let a = pqi.neg();
    let b = pqi.mul(&pq.p)?.add(&pq.q)?.neg();
    let d = qi.mul(&pq.p)?;
    MatrixField::from_blocks(&a, &b, &qi, &d)
}

/// Builds and validates the structure generated by `(P, Q)`.
pub fn reconstruct_from_pq(pq: &PqPair) -> Result<AlmostComplexStructure> {
    AlmostComplexStructure::from_cotangent(reconstruct_cotangent(pq)?)
}

/// `G⁻¹ j_cot G = [[A, B+E], [C-E, D]]` for a constant frame `G`.
#[derive(Debug, Clone)]
pub struct BlockDecomposition {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub base_node: usize,
    /// `G⁻¹ j_cot G`.
    pub normalized: MatrixField,
    pub a: MatrixField,
    pub b: MatrixField,
    pub c: MatrixField,
    pub d: MatrixField,
}

impl BlockDecomposition {
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn patch(&self) -> &Arc<Patch> {
        self.a.patch()
    }

    /// `C - E`.
    pub fn c_minus_e(&self) -> Result<MatrixField> {
        self.c.sub(&MatrixField::identity(self.patch(), self.n()))
    }

    /// `B + E`.
    pub fn b_plus_e(&self) -> Result<MatrixField> {
        self.b.add(&MatrixField::identity(self.patch(), self.n()))
    }

    /// The normalized structure as a validated object.
    pub fn normalized_structure(&self) -> Result<AlmostComplexStructure> {
        AlmostComplexStructure::from_cotangent(self.normalized.clone())
    }
}

/// A real frame `G` with `G⁻¹ M G = [[0, E], [-E, 0]]` for a constant `M` with `M² = -E`.
///
/// The columns of `M + iE` span the `+i` eigenspace; `n` of them are chosen
/// greedily (largest Gram-Schmidt residual, ties going to the last `n`
/// coordinates). For `v = M e_j + i e_j`, `G1` gets `M e_j` and `G2` gets `e_j`,
/// which satisfy `M G1 = -G2` and `M G2 = G1`.
pub fn normalizing_frame(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dim = m.nrows();
    let n = dim / 2;
    let mut order: Vec<usize> = (n..dim).chain(0..n).collect();
    let mut basis: Vec<DVector<C64>> = Vec::new();
    let mut chosen = Vec::new();
    for _ in 0..n {
        let mut best: Option<(f64, usize, DVector<C64>)> = None;
        for &j in &order {
            let mut v = DVector::from_fn(dim, |r, _| {
                C64::new(m[(r, j)], if r == j { 1.0 } else { 0.0 })
            });
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
            let norm = v.norm();
            if best.as_ref().is_none_or(|(bn, _, _)| norm > *bn * (1.0 + 1e-12)) {
                best = Some((norm, j, v));
            }
        }
        let (norm, j, v) = best.expect("candidates");
        if norm < 1e-9 {
            return Err(Error::Precondition(
                "base-point matrix has a degenerate +i eigenspace".into(),
            ));
        }
        basis.push(v / C64::new(norm, 0.0));
        chosen.push(j);
        order.retain(|&c| c != j);
    }
    let mut g = DMatrix::zeros(dim, dim);
    for (col, &j) in chosen.iter().enumerate() {
        for r in 0..dim {
            g[(r, col)] = m[(r, j)];
            g[(r, n + col)] = if r == j { 1.0 } else { 0.0 };
        }
    }
    Ok(g)
}

/// Brings `j_cot(base)` to `[[0, E], [-E, 0]]` and decomposes the whole field.
pub fn normalize_at_origin(
    acs: &AlmostComplexStructure,
    base_node: usize,
) -> Result<BlockDecomposition> {
    let patch = acs.patch().clone();
    if base_node >= patch.len() {
        return Err(Error::OutsidePatch {
            point: vec![base_node as f64],
        });
    }
    let n = acs.dim_half();
    let m = acs.j_cot().at(base_node)?;
    let g = normalizing_frame(&m)?;
    let g_inv = g
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Precondition("normalizing frame is singular".into()))?;
    let normalized = MatrixField::from_constant(&patch, &g_inv)
        .mul(acs.j_cot())?
        .mul(&MatrixField::from_constant(&patch, &g))?;
    let e = MatrixField::identity(&patch, n);
    let bd = BlockDecomposition {
        a: normalized.block(0, 0, n, n),
        b: normalized.block(0, n, n, n).sub(&e)?,
        c: normalized.block(n, 0, n, n).add(&e)?,
        d: normalized.block(n, n, n, n),
        normalized,
        g,
        g_inv,
        base_node,
    };
    linalg::check_invertible(&bd.c_minus_e()?, &patch.all_nodes(), "C - E").map_err(|e| match e {
        Error::Singular { what, node, .. } => Error::Singular {
            what,
            node,
            hint: Some("the structure leaves the normalized neighborhood; use a smaller patch around the base point".into()),
        },
        other => other,
    })?;
    Ok(bd)
}

/// `Q = (C-E)⁻¹`, `P = (C-E)⁻¹ D`.
pub fn extract_pq(bd: &BlockDecomposition) -> Result<PqPair> {
    let q = linalg::inverse_field(&bd.c_minus_e()?, "C - E")?;
    let p = q.mul(&bd.d)?;
    PqPair::new(p, q)
}

/// Worst violations of the four block identities over the grid.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BlockIdentityReport {
    pub anchor: String,
    /// `A² + (B+E)(C-E) + E`
    pub first: f64,
    /// `A(B+E) + (B+E)D`
    pub second: f64,
    /// `(C-E)A + D(C-E)`
    pub third: f64,
    /// `(C-E)(B+E) + D² + E`
    pub fourth: f64,
    /// `[[A, B+E], [C-E, D]] - G⁻¹ j_cot G`
    pub reassembly: f64,
    /// Largest `|A|, |B|, |C|, |D|` entry at the base point.
    pub base_point_blocks: f64,
}

impl BlockIdentityReport {
    pub fn max(&self) -> f64 {
        [self.first, self.second, self.third, self.fourth, self.reassembly]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

pub fn block_identities(bd: &BlockDecomposition, acs: &AlmostComplexStructure) -> Result<BlockIdentityReport> {
    let patch = bd.patch().clone();
    let n = bd.n();
    let nodes = patch.all_nodes();
    let fields: Vec<ScalarField> = [&bd.a, &bd.b, &bd.c, &bd.d, acs.j_cot()]
        .iter()
        .flat_map(|m| m.entries().iter().cloned())
        .collect();
    let table = crate::field::Evaluator::new(&fields)?.table(&nodes)?;
    let nn = n * n;
    let dd = 4 * nn;
    let e = DMatrix::<f64>::identity(n, n);
    let rows = par::map_range(nodes.len(), |i| {
        let row = table.row(i);
        let blk = |k: usize| DMatrix::from_row_slice(n, n, &row[k * nn..(k + 1) * nn]);
        let (a, b, c, d) = (blk(0), blk(1), blk(2), blk(3));
        let j = DMatrix::from_row_slice(2 * n, 2 * n, &row[dd..dd + 4 * nn]);
        let bpe = &b + &e;
        let cme = &c - &e;
        let first = inf_norm(&(&a * &a + &bpe * &cme + &e));
        let second = inf_norm(&(&a * &bpe + &bpe * &d));
        let third = inf_norm(&(&cme * &a + &d * &cme));
        let fourth = inf_norm(&(&cme * &bpe + &d * &d + &e));
        let mut re = DMatrix::zeros(2 * n, 2 * n);
        re.view_mut((0, 0), (n, n)).copy_from(&a);
        re.view_mut((0, n), (n, n)).copy_from(&bpe);
        re.view_mut((n, 0), (n, n)).copy_from(&cme);
        re.view_mut((n, n), (n, n)).copy_from(&d);
        let reassembly = inf_norm(&(re - &bd.g_inv * j * &bd.g));
        let base = linalg::max_abs(&a)
            .max(linalg::max_abs(&b))
            .max(linalg::max_abs(&c))
            .max(linalg::max_abs(&d));
        [first, second, third, fourth, reassembly, base]
    });
    let mut out = [0.0f64; 5];
    for r in &rows {
        for (o, v) in out.iter_mut().zip(r) {
            *o = o.max(*v);
        }
    }
    let base_i = nodes.iter().position(|&k| k == bd.base_node).unwrap_or(0);
    Ok(BlockIdentityReport {
        anchor: "block decomposition identities".into(),
        first: out[0],
        second: out[1],
        third: out[2],
        fourth: out[3],
        reassembly: out[4],
        base_point_blocks: rows[base_i][5],
    })
}

/// Right multiplication by `i` on `(x0, x1, x2, x3)`, row convention.
pub fn quaternion_s() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, 1.0, 0.0, 0.0, //
            -1.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, -1.0, //
            0.0, 0.0, 1.0, 0.0,
        ],
    )
}

/// Right multiplication by `j` on `(x0, x1, x2, x3)`, row convention.
pub fn quaternion_t() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0, //
            -1.0, 0.0, 0.0, 0.0, //
            0.0, -1.0, 0.0, 0.0,
        ],
    )
}

/// The standard quaternionic pair `(S, T)`.
pub fn quaternionic_standard() -> (DMatrix<f64>, DMatrix<f64>) {
    (quaternion_s(), quaternion_t())
}

/// Block-diagonal repetition of a 4×4 matrix.
pub fn block_diag4(m: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(dim, dim);
    for b in 0..dim / 4 {
        out.view_mut((4 * b, 4 * b), (4, 4)).copy_from(m);
    }
    out
}

/// Anticommuting pair of almost-complex structures on a patch of dimension `4n`.
#[derive(Debug, Clone)]
pub struct HypercomplexStructure {
    pub j: AlmostComplexStructure,
    pub k: AlmostComplexStructure,
    pub anti_residual: f64,
}

impl HypercomplexStructure {
    pub fn new(j: AlmostComplexStructure, k: AlmostComplexStructure) -> Result<HypercomplexStructure> {
        if !j.dim().is_multiple_of(4) {
            return Err(Error::DimensionMismatch(format!(
                "hypercomplex structures need dimension 4n, got {}",
                j.dim()
            )));
        }
        if j.dim() != k.dim() || **j.patch() != **k.patch() {
            return Err(Error::PatchMismatch);
        }
        let sum = j.j_cot().mul(k.j_cot())?.add(&k.j_cot().mul(j.j_cot())?)?;
        let nodes = j.patch().all_nodes();
        let values = sum.at_nodes(&nodes)?;
        let res = par::map_slice(&values, inf_norm);
        let (anti_residual, node) = worst_of(&nodes, &res);
        if anti_residual > ACS_TOL {
            return Err(Error::NotHypercomplex {
                residual: anti_residual,
                node: j.patch().multi_index(node),
            });
        }
        Ok(HypercomplexStructure { j, k, anti_residual })
    }

    /// `j_cot = S`, `k_cot = T` on every block of four coordinates.
    pub fn flat(patch: &Arc<Patch>) -> Result<HypercomplexStructure> {
        let dim = patch.dim();
        let j = AlmostComplexStructure::from_cotangent(MatrixField::from_constant(
            patch,
            &block_diag4(&quaternion_s(), dim),
        ))?;
        let k = AlmostComplexStructure::from_cotangent(MatrixField::from_constant(
            patch,
            &block_diag4(&quaternion_t(), dim),
        ))?;
        HypercomplexStructure::new(j, k)
    }

    pub fn patch(&self) -> &Arc<Patch> {
        self.j.patch()
    }

    pub fn dim(&self) -> usize {
        self.j.dim()
    }
}

/// `b J + c K + d JK` on cotangent matrices, for `b² + c² + d² = 1`.
pub fn twistor_structure(
    h: &HypercomplexStructure,
    b: f64,
    c: f64,
    d: f64,
) -> Result<AlmostComplexStructure> {
    let norm_sq = b * b + c * c + d * d;
    if (norm_sq - 1.0).abs() > 1e-12 {
        return Err(Error::OffSphere { norm_sq });
    }
    let jk = h.j.j_cot().mul(h.k.j_cot())?;
    let m = h
        .j
        .j_cot()
        .scale(b)
        .add(&h.k.j_cot().scale(c))?
        .add(&jk.scale(d))?;
    AlmostComplexStructure::from_cotangent(m)
}

/// Sup over interior nodes of the Nijenhuis tensor on coordinate fields,
/// `N^k_ab = J^m_a ∂_m J^k_b − J^m_b ∂_m J^k_a − J^k_m (∂_a J^m_b − ∂_b J^m_a)`
/// with `J^k_j = j_tan[k][j]`.
pub fn nijenhuis_residual(acs: &AlmostComplexStructure, mode: DiffMode) -> Result<f64> {
    let patch = acs.patch().clone();
    if mode == DiffMode::FiniteDifference {
        patch.require_fd()?;
    }
    let dim = acs.dim();
    let jt = acs.j_tan();
    let mut fields: Vec<ScalarField> = jt.entries().to_vec();
    for m in 0..dim {
        fields.extend(jt.partial(m, mode)?.entries().iter().cloned());
    }
    let nodes = patch.interior_nodes();
    let table = crate::field::Evaluator::new(&fields)?.table(&nodes)?;
    let dd = dim * dim;
    let per_node = par::map_range(nodes.len(), |i| {
        let row = table.row(i);
        let j = |k: usize, l: usize| row[k * dim + l];
        let dj = |m: usize, k: usize, l: usize| row[dd * (m + 1) + k * dim + l];
        let mut worst = 0.0f64;
        for a in 0..dim {
            for b in a + 1..dim {
                for k in 0..dim {
                    let mut v = 0.0;
                    for m in 0..dim {
                        v += j(m, a) * dj(m, k, b) - j(m, b) * dj(m, k, a);
                        v -= j(k, m) * (dj(a, m, b) - dj(b, m, a));
                    }
                    worst = worst.max(v.abs());
                }
            }
        }
        worst
    });
    Ok(per_node.into_iter().fold(0.0, f64::max))
}
