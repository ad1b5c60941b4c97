//! Verification of Spencer coordinate charts.
//!
//! A chart of type `m` consists of `m` almost-holomorphic coordinates
//! `w¹…w^m` and `n − m` complementary complex coordinates `z^{m+1}…z^n`. In the
//! 1-form basis `θ = (dw, dz, dw̄, dz̄)` the matrix of `J*` (column `j` holds the
//! coefficients of `J*θ_j`) must have `iE_m` in its leading block and zeros in
//! the rest of the first column block. With `Θ` the matrix whose rows are the
//! coefficient vectors of `θ` in `dx`, that matrix is `(Θ j_tan Θ⁻¹)ᵀ`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::{ComplexField, DiffMode, Evaluator, ScalarField};
use crate::grid::Patch;
use crate::holomorphy::{antiholo_residual, holo_residual};
use crate::hypercomplex::{j_hyperholo_residual, k_hyperholo_residual, QuaternionFunction};
use crate::linalg::C64;
use crate::par;
use crate::report::ResidualReport;
use crate::structures::{AlmostComplexStructure, HypercomplexStructure};

/// Relative determinant below which the chart Jacobian counts as degenerate.
pub const DET_TOL: f64 = 1e-8;

/// Pattern tolerance: `1e-8` in exact mode, `30 h²` with finite differences.
pub fn pattern_tolerance(patch: &Patch, mode: DiffMode) -> f64 {
    match mode {
        DiffMode::Exact => 1e-8,
        DiffMode::FiniteDifference => 30.0 * patch.max_spacing().powi(2),
    }
}

#[derive(Debug, Clone)]
pub struct SpencerChart {
    holo: Vec<ComplexField>,
    complement: Vec<ComplexField>,
}

impl SpencerChart {
    /// `holo` are the claimed almost-holomorphic coordinates (`m` of them),
    /// `complement` completes them to `n = dim/2` complex coordinates.
    pub fn new(holo: Vec<ComplexField>, complement: Vec<ComplexField>) -> Result<SpencerChart> {
        let Some(first) = holo.first().or(complement.first()) else {
            return Err(Error::DimensionMismatch("chart without coordinates".into()));
        };
        let patch = first.patch().clone();
        let n = patch.dim_half();
        if holo.len() + complement.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} + {} chart coordinates on a patch of complex dimension {n}",
                holo.len(),
                complement.len()
            )));
        }
        if holo.iter().chain(&complement).any(|c| **c.patch() != *patch) {
            return Err(Error::PatchMismatch);
        }
        Ok(SpencerChart { holo, complement })
    }

    pub fn m(&self) -> usize {
        self.holo.len()
    }

    pub fn n(&self) -> usize {
        self.holo.len() + self.complement.len()
    }

    pub fn patch(&self) -> &Arc<Patch> {
        self.holo.first().unwrap_or_else(|| &self.complement[0]).patch()
    }

    pub fn holo(&self) -> &[ComplexField] {
        &self.holo
    }

    pub fn complement(&self) -> &[ComplexField] {
        &self.complement
    }

    fn coords(&self) -> impl Iterator<Item = &ComplexField> {
        self.holo.iter().chain(&self.complement)
    }
}

/// Gradient fields of all chart coordinates, `[∇Re w, ∇Im w]` per coordinate.
fn chart_gradients(chart: &SpencerChart, mode: DiffMode) -> Result<Vec<ScalarField>> {
    let mut out = Vec::new();
    for c in chart.coords() {
        out.extend(c.re.gradient(mode)?);
        out.extend(c.im.gradient(mode)?);
    }
    Ok(out)
}

/// `Θ` (2n × 2n complex) from a table row of chart gradients.
fn theta(n: usize, d: usize, g: &[f64]) -> DMatrix<C64> {
    let mut t = DMatrix::<C64>::zeros(d, d);
    for c in 0..n {
        for k in 0..d {
            let re = g[2 * c * d + k];
            let im = g[2 * c * d + d + k];
            t[(c, k)] = C64::new(re, im);
            t[(n + c, k)] = C64::new(re, -im);
        }
    }
    t
}

/// `|det Θ| / Π ‖row‖`, one for orthogonal rows, zero for a degenerate chart.
fn relative_det(t: &DMatrix<C64>) -> f64 {
    let scale: f64 = t.row_iter().map(|r| r.norm()).product();
    if scale == 0.0 {
        return 0.0;
    }
    t.clone().determinant().norm() / scale
}

#[derive(Debug, Clone, Serialize)]
pub struct PatternReport {
    pub anchor: String,
    pub mode: DiffMode,
    pub m: usize,
    pub n: usize,
    pub tolerance: f64,
    /// `+1` when `iE_m` is expected in the leading block, `-1` for `−iE_m`.
    pub eigen_sign: i8,
    /// `‖M₁₁ ∓ iE_m‖`, max entry over nodes.
    pub lead: f64,
    /// Rows of the complementary `dz` block in the first column block.
    pub below: f64,
    /// Rows of the `dw̄` block in the first column block.
    pub conjugate: f64,
    /// Rows of the `dz̄` block in the first column block.
    pub last: f64,
    /// Largest unconstrained entry, for scale.
    pub starred_max: f64,
    /// Cauchy–Riemann residual of each claimed coordinate.
    pub coordinate_residuals: Vec<f64>,
    pub min_relative_det: f64,
    pub worst_node: Vec<usize>,
    pub worst_block: String,
    pub passes: bool,
}

impl PatternReport {
    pub fn block_residuals(&self) -> [f64; 4] {
        [self.lead, self.below, self.conjugate, self.last]
    }

    pub fn max_residual(&self) -> f64 {
        self.block_residuals()
            .into_iter()
            .chain(self.coordinate_residuals.iter().copied())
            .fold(0.0, f64::max)
    }
}

fn pattern(
    acs: &AlmostComplexStructure,
    chart: &SpencerChart,
    mode: DiffMode,
    tol: f64,
    sign: f64,
) -> Result<PatternReport> {
    let d = acs.dim();
    let n = chart.n();
    let m = chart.m();
    if **chart.patch() != **acs.patch() {
        return Err(Error::PatchMismatch);
    }
    if 2 * n != d {
        return Err(Error::DimensionMismatch(format!(
            "chart of complex dimension {n} for a structure of size {d}"
        )));
    }
    let patch = acs.patch().clone();
    let nodes = patch.all_nodes();
    let mut fields = acs.j_tan().entries().to_vec();
    fields.extend(chart_gradients(chart, mode)?);
    let table = Evaluator::new(&fields)?.table(&nodes)?;
    let rows = par::map_range(nodes.len(), |i| {
        let r = table.row(i);
        let jt = DMatrix::from_row_slice(d, d, &r[..d * d]).map(|v| C64::new(v, 0.0));
        let t = theta(n, d, &r[d * d..]);
        let rel = relative_det(&t);
        if rel <= DET_TOL {
            return [rel, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN];
        }
        let tinv = t.clone().try_inverse().expect("checked determinant");
        let mat = (&t * jt * tinv).transpose();
        let mut blocks = [0.0f64; 4];
        let mut starred = 0.0f64;
        for row in 0..d {
            for col in 0..d {
                let v = mat[(row, col)];
                if col < m {
                    let target = if row == col { C64::new(0.0, sign) } else { C64::new(0.0, 0.0) };
                    let b = match row {
                        r if r < m => 0,
                        r if r < n => 1,
                        r if r < n + m => 2,
                        _ => 3,
                    };
                    blocks[b] = blocks[b].max((v - target).norm());
                } else if !(n..n + m).contains(&col) {
                    starred = starred.max(v.norm());
                }
            }
        }
        [rel, blocks[0], blocks[1], blocks[2], blocks[3], starred]
    });
    let (worst_det, det_node) = rows
        .iter()
        .zip(&nodes)
        .map(|(r, &k)| (r[0], k))
        .fold((f64::INFINITY, nodes[0]), |a, b| if b.0 < a.0 { b } else { a });
    if worst_det <= DET_TOL {
        return Err(Error::Singular {
            what: "chart Jacobian".into(),
            node: patch.multi_index(det_node),
            hint: Some("chart coordinates are not independent at this node".into()),
        });
    }
    let names = ["lead", "below", "conjugate", "last"];
    let mut maxes = [0.0f64; 4];
    let mut worst = (0.0f64, nodes[0], 0usize);
    let mut starred_max = 0.0f64;
    for (r, &k) in rows.iter().zip(&nodes) {
        for b in 0..4 {
            maxes[b] = maxes[b].max(r[b + 1]);
            if r[b + 1] > worst.0 {
                worst = (r[b + 1], k, b);
            }
        }
        starred_max = starred_max.max(r[5]);
    }
    let coordinate_residuals = chart
        .holo
        .iter()
        .map(|w| {
            let rep = if sign > 0.0 {
                holo_residual(acs, w, mode)?
            } else {
                antiholo_residual(acs, w, mode)?
            };
            Ok(rep.sup_norm)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = PatternReport {
        anchor: if sign > 0.0 {
            "Spencer chart pattern of J* with iE_m".into()
        } else {
            "Spencer chart pattern of J* with -iE_m".into()
        },
        mode,
        m,
        n,
        tolerance: tol,
        eigen_sign: if sign > 0.0 { 1 } else { -1 },
        lead: maxes[0],
        below: maxes[1],
        conjugate: maxes[2],
        last: maxes[3],
        starred_max,
        coordinate_residuals,
        min_relative_det: worst_det,
        worst_node: patch.multi_index(worst.1),
        worst_block: names[worst.2].into(),
        passes: false,
    };
    report.passes = report.max_residual() <= tol;
    Ok(report)
}

/// Checks the chart: claimed coordinates almost holomorphic and the block
/// pattern of `J*` in the chart basis.
pub fn verify_chart(
    acs: &AlmostComplexStructure,
    chart: &SpencerChart,
    mode: DiffMode,
    tol: f64,
) -> Result<PatternReport> {
    pattern(acs, chart, mode, tol, 1.0)
}

/// Same pattern with `−iE_m` expected: the claimed coordinates are almost
/// antiholomorphic.
pub fn verify_antichart(
    acs: &AlmostComplexStructure,
    chart: &SpencerChart,
    mode: DiffMode,
    tol: f64,
) -> Result<PatternReport> {
    pattern(acs, chart, mode, tol, -1.0)
}

/// Numerical rank with relative threshold `1e-8` of the largest singular value.
fn complex_rank(m: &DMatrix<C64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-8 * top).count()
}

#[derive(Debug, Clone, Serialize)]
pub struct RankReport {
    pub m: usize,
    pub min_rank: usize,
    pub worst_node: Vec<usize>,
    pub independent: bool,
}

/// Minimum over nodes of the rank of the `m × 2n` complex Jacobian of `w¹…w^m`.
pub fn independence_rank(coords: &[ComplexField], mode: DiffMode) -> Result<RankReport> {
    let Some(first) = coords.first() else {
        return Err(Error::DimensionMismatch("no coordinates".into()));
    };
    let patch = first.patch().clone();
    let d = patch.dim();
    let mut fields = Vec::new();
    for c in coords {
        if **c.patch() != *patch {
            return Err(Error::PatchMismatch);
        }
        fields.extend(c.re.gradient(mode)?);
        fields.extend(c.im.gradient(mode)?);
    }
    let nodes = patch.all_nodes();
    let t = Evaluator::new(&fields)?.table(&nodes)?;
    let m = coords.len();
    let ranks = par::map_range(nodes.len(), |i| {
        let r = t.row(i);
        let jac = DMatrix::from_fn(m, d, |c, k| C64::new(r[2 * c * d + k], r[2 * c * d + d + k]));
        complex_rank(&jac)
    });
    let (min_rank, k) = ranks
        .iter()
        .zip(&nodes)
        .map(|(&r, &k)| (r, k))
        .min_by_key(|&(r, _)| r)
        .expect("nonempty patch");
    Ok(RankReport {
        m,
        min_rank,
        worst_node: patch.multi_index(k),
        independent: min_rank == m,
    })
}

/// Least-squares fit of `h` by a complex polynomial in the chart coordinates.
#[derive(Debug, Clone, Serialize)]
pub struct FitDiagnostic {
    pub degree: usize,
    /// Exponent tuples of the monomials, in coefficient order.
    pub monomials: Vec<Vec<usize>>,
    /// `(re, im)` per monomial.
    pub coefficients: Vec<(f64, f64)>,
    pub max_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuperpositionReport {
    pub holo_residual: f64,
    pub chart: PatternReport,
    /// Coefficients of `dh` on `dz^{m+1..n}, dw̄, dz̄`; one equation per basis element.
    pub complement_coefficients: ResidualReport,
    pub fit: Option<FitDiagnostic>,
    pub passes: bool,
}

fn monomials(m: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0; m]];
    for deg in 1..=degree {
        let mut cur = vec![0usize; m];
        fn rec(i: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if i + 1 == cur.len() {
                cur[i] = left;
                out.push(cur.clone());
                return;
            }
            for e in (0..=left).rev() {
                cur[i] = e;
                rec(i + 1, left - e, cur, out);
            }
        }
        if m > 0 {
            rec(0, deg, &mut cur, &mut out);
        }
    }
    out
}

fn fit_polynomial(w: &[Vec<C64>], h: &[C64], degree: usize) -> FitDiagnostic {
    let m = w.first().map_or(0, Vec::len);
    let mons = monomials(m, degree);
    let a = DMatrix::from_fn(h.len(), mons.len(), |i, j| {
        mons[j]
            .iter()
            .zip(&w[i])
            .fold(C64::new(1.0, 0.0), |acc, (&e, &z)| acc * z.powi(e as i32))
    });
    let b = DVector::from_column_slice(h);
    let coef = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-12)
        .unwrap_or_else(|_| DVector::zeros(mons.len()));
    let res = &a * &coef - &b;
    FitDiagnostic {
        degree,
        monomials: mons,
        coefficients: coef.iter().map(|c| (c.re, c.im)).collect(),
        max_residual: res.iter().fold(0.0, |acc, r| acc.max(r.norm())),
    }
}

/// Infinitesimal superposition: `dh ∈ span(dw¹…dw^m)` at every interior node.
/// `fit_degree` adds a least-squares polynomial fit of `H` as a diagnostic.
pub fn superposition_check(
    acs: &AlmostComplexStructure,
    chart: &SpencerChart,
    h: &ComplexField,
    mode: DiffMode,
    tol: f64,
    fit_degree: Option<usize>,
) -> Result<SuperpositionReport> {
    let chart_report = verify_chart(acs, chart, mode, tol)?;
    if !chart_report.passes {
        return Err(Error::Precondition(format!(
            "chart fails verification (residual {:.3e})",
            chart_report.max_residual()
        )));
    }
    let hr = holo_residual(acs, h, mode)?.sup_norm;
    if hr > tol {
        return Err(Error::Precondition(format!(
            "function is not almost holomorphic (residual {hr:.3e})"
        )));
    }
    let d = acs.dim();
    let n = chart.n();
    let m = chart.m();
    let patch = acs.patch().clone();
    let nodes = patch.interior_nodes();
    let mut fields = chart_gradients(chart, mode)?;
    fields.extend(h.re.gradient(mode)?);
    fields.extend(h.im.gradient(mode)?);
    for c in chart.holo() {
        fields.push(c.re.clone());
        fields.push(c.im.clone());
    }
    fields.push(h.re.clone());
    fields.push(h.im.clone());
    let t = Evaluator::new(&fields)?.table(&nodes)?;
    let g0 = 2 * n * d;
    let rows = par::map_range(nodes.len(), |i| {
        let r = t.row(i);
        let th = theta(n, d, r);
        let grad = DVector::from_fn(d, |k, _| C64::new(r[g0 + k], r[g0 + d + k]));
        // ∇h = Θᵀ c
        let c = th.transpose().lu().solve(&grad).unwrap_or_else(|| DVector::from_element(d, C64::new(f64::NAN, 0.0)));
        (m..d).map(|k| c[k].norm()).collect::<Vec<_>>()
    });
    let names: Vec<String> = (m..d)
        .map(|k| {
            if k < n {
                format!("dz{}", k + 1)
            } else if k < n + m {
                format!("dwbar{}", k - n + 1)
            } else {
                format!("dzbar{}", k - n + 1)
            }
        })
        .collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let complement_coefficients = ResidualReport::from_values(
        "infinitesimal superposition: dh in span(dw)",
        mode,
        &patch,
        &nodes,
        &refs,
        &rows.concat(),
    );
    let fit = fit_degree.map(|deg| {
        let v0 = 2 * n * d + 2 * d;
        let w: Vec<Vec<C64>> = (0..nodes.len())
            .map(|i| {
                let r = t.row(i);
                (0..m).map(|c| C64::new(r[v0 + 2 * c], r[v0 + 2 * c + 1])).collect()
            })
            .collect();
        let hv: Vec<C64> = (0..nodes.len())
            .map(|i| {
                let r = t.row(i);
                C64::new(r[v0 + 2 * m], r[v0 + 2 * m + 1])
            })
            .collect();
        fit_polynomial(&w, &hv, deg)
    });
    Ok(SuperpositionReport {
        holo_residual: hr,
        passes: complement_coefficients.sup_norm <= tol,
        chart: chart_report,
        complement_coefficients,
        fit,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TransitionReport {
    /// `sup 2|∂H/∂w̄_j|` over the image points `w(x)`.
    pub cauchy_riemann: f64,
    /// `sup |v(x) − H(w(x))|`.
    pub consistency: f64,
    pub samples: usize,
    pub passes: bool,
}

/// Checks a closed-form transition `v = H(w)` between two verified charts.
/// `transition[j] = (Re H_j, Im H_j)` as expressions in `2m` real variables,
/// `x_{2j+1} = Re w^j`, `x_{2j+2} = Im w^j`.
pub fn transition_holomorphy_check(
    acs: &AlmostComplexStructure,
    a: &SpencerChart,
    b: &SpencerChart,
    transition: &[(Expr, Expr)],
    mode: DiffMode,
    tol: f64,
) -> Result<TransitionReport> {
    if **a.patch() != **b.patch() {
        return Err(Error::PatchMismatch);
    }
    let m = a.m();
    if b.m() != m || transition.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "transition between charts of types {} and {} with {} components",
            m,
            b.m(),
            transition.len()
        )));
    }
    for (name, chart) in [("first", a), ("second", b)] {
        let r = verify_chart(acs, chart, mode, tol)?;
        if !r.passes {
            return Err(Error::Precondition(format!(
                "{name} chart fails verification (residual {:.3e})",
                r.max_residual()
            )));
        }
    }
    let mut exprs = Vec::new();
    for (re, im) in transition {
        re.check_dim(2 * m)?;
        im.check_dim(2 * m)?;
        exprs.push(re.clone());
        exprs.push(im.clone());
    }
    // CR pieces U_a − V_b and V_a + U_b per component and variable
    for (u, v) in transition {
        for c in 0..m {
            exprs.push(&u.diff(2 * c) - &v.diff(2 * c + 1));
            exprs.push(&v.diff(2 * c) + &u.diff(2 * c + 1));
        }
    }
    let prog = crate::expr::Program::compile(&exprs, 2 * m);
    let patch = a.patch().clone();
    let nodes = patch.interior_nodes();
    let mut fields = Vec::new();
    for c in a.holo().iter().chain(b.holo()) {
        fields.push(c.re.clone());
        fields.push(c.im.clone());
    }
    let t = Evaluator::new(&fields)?.table(&nodes)?;
    let out = par::map_range(nodes.len(), |i| {
        let r = t.row(i);
        let w = &r[..2 * m];
        let v = &r[2 * m..];
        match prog.eval(w) {
            Ok(vals) => {
                let cons = (0..m)
                    .map(|j| (vals[2 * j] - v[2 * j]).hypot(vals[2 * j + 1] - v[2 * j + 1]))
                    .fold(0.0, f64::max);
                let cr = (0..m * m)
                    .map(|p| vals[2 * m + 2 * p].hypot(vals[2 * m + 2 * p + 1]))
                    .fold(0.0, f64::max);
                (cr, cons)
            }
            Err(_) => (f64::NAN, f64::NAN),
        }
    });
    let fold = |f: &dyn Fn(&(f64, f64)) -> f64| {
        out.iter().map(f).fold(0.0f64, |a, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b) })
    };
    let cauchy_riemann = fold(&|p| p.0);
    let consistency = fold(&|p| p.1);
    Ok(TransitionReport {
        cauchy_riemann,
        consistency,
        samples: nodes.len(),
        passes: cauchy_riemann <= tol && consistency <= tol,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HyperPatternReport {
    pub m: usize,
    /// Pattern with `iE_m` for the J-holomorphic parts `f_α`.
    pub holomorphic: PatternReport,
    /// Pattern with `−iE_m` for the J-antiholomorphic parts `φ_α`.
    pub antiholomorphic: PatternReport,
    pub passes: bool,
}

/// Paired pattern for a chart of J-hyperholomorphic functions `F_α = f_α + φ_α j`.
/// `extra` are further J-holomorphic coordinates completing
/// `(f_α, φ̄_α)` to a chart.
pub fn hyper_spencer_pattern_check(
    h: &HypercomplexStructure,
    chart: &[QuaternionFunction],
    extra: &[ComplexField],
    mode: DiffMode,
    tol: f64,
) -> Result<HyperPatternReport> {
    let fs: Vec<ComplexField> = chart.iter().map(QuaternionFunction::f).collect();
    let phis: Vec<ComplexField> = chart.iter().map(QuaternionFunction::phi).collect();
    let mut comp = phis.iter().map(ComplexField::conj).collect::<Vec<_>>();
    comp.extend(extra.iter().cloned());
    let holomorphic = verify_chart(&h.j, &SpencerChart::new(fs.clone(), comp)?, mode, tol)?;
    let mut comp = fs.iter().map(ComplexField::conj).collect::<Vec<_>>();
    comp.extend(extra.iter().map(ComplexField::conj));
    let antiholomorphic = verify_antichart(&h.j, &SpencerChart::new(phis, comp)?, mode, tol)?;
    Ok(HyperPatternReport {
        m: chart.len(),
        passes: holomorphic.passes && antiholomorphic.passes,
        holomorphic,
        antiholomorphic,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AffineTransitionReport {
    pub j_residual: f64,
    pub k_residual: f64,
    /// Max residual of the least-squares degree-1 fit over all components.
    pub affine_fit_residual: f64,
    /// Largest quadratic coefficient of the degree-2 fit.
    pub quadratic_coefficient: f64,
    pub hyperholomorphic: bool,
    pub affine: bool,
}

fn real_fit(points: &[Vec<f64>], values: &[f64], degree: usize) -> (DVector<f64>, f64, Vec<Vec<usize>>) {
    let d = points.first().map_or(0, Vec::len);
    let mons = monomials(d, degree);
    let a = DMatrix::from_fn(values.len(), mons.len(), |i, j| {
        mons[j].iter().zip(&points[i]).fold(1.0, |acc, (&e, &x)| acc * x.powi(e as i32))
    });
    let b = DVector::from_column_slice(values);
    let coef = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-12)
        .unwrap_or_else(|_| DVector::zeros(mons.len()));
    let res = (&a * &coef - &b).amax();
    (coef, res, mons)
}

/// For a transition map `G` between quaternionic charts (a function on the
/// flat 4-dimensional patch): J- and K-hyperholomorphy, and whether it is affine.
pub fn affine_transition_check(
    h: &HypercomplexStructure,
    g: &QuaternionFunction,
    mode: DiffMode,
    tol: f64,
) -> Result<AffineTransitionReport> {
    let j_residual = j_hyperholo_residual(h, g, mode)?.residual.sup_norm;
    let k_residual = k_hyperholo_residual(h, g, mode)?.residual.sup_norm;
    let patch = h.patch().clone();
    let nodes = patch.interior_nodes();
    let comps: Vec<ScalarField> = g.components().into_iter().cloned().collect();
    let t = Evaluator::new(&comps)?.table(&nodes)?;
    let points: Vec<Vec<f64>> = nodes.iter().map(|&k| patch.point(k)).collect();
    let mut affine_fit_residual = 0.0f64;
    let mut quadratic_coefficient = 0.0f64;
    for c in 0..4 {
        let vals: Vec<f64> = (0..nodes.len()).map(|i| t.row(i)[c]).collect();
        let (_, r1, _) = real_fit(&points, &vals, 1);
        let (coef, _, mons) = real_fit(&points, &vals, 2);
        affine_fit_residual = affine_fit_residual.max(r1);
        for (k, mon) in mons.iter().enumerate() {
            if mon.iter().sum::<usize>() == 2 {
                quadratic_coefficient = quadratic_coefficient.max(coef[k].abs());
            }
        }
    }
    Ok(AffineTransitionReport {
        hyperholomorphic: j_residual <= tol && k_residual <= tol,
        affine: affine_fit_residual <= tol,
        j_residual,
        k_residual,
        affine_fit_residual,
        quadratic_coefficient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::type1_structure;

    fn p4() -> Arc<Patch> {
        Arc::new(Patch::cube(4, -1.0, 1.0, 5).unwrap())
    }

    #[test]
    fn type_one_chart() {
        let p = p4();
        let acs = type1_structure(&p).unwrap();
        let z = ComplexField::parse(&p, "x1", "x2").unwrap();
        let w = ComplexField::parse(&p, "x3", "x4").unwrap();
        let chart = SpencerChart::new(vec![z.clone()], vec![w.clone()]).unwrap();
        let r = verify_chart(&acs, &chart, DiffMode::Exact, 1e-8).unwrap();
        assert!(r.passes, "{r:?}");
        assert!(r.starred_max > 0.5);
        let bad = SpencerChart::new(vec![z, w], vec![]).unwrap();
        let r = verify_chart(&acs, &bad, DiffMode::Exact, 1e-8).unwrap();
        assert!(!r.passes && r.max_residual() > 0.1);
    }

    #[test]
    fn rank_detects_dependence() {
        let p = p4();
        let z1 = ComplexField::parse(&p, "x1", "x2").unwrap();
        let z2 = ComplexField::parse(&p, "x3", "x4").unwrap();
        let sq = z1.mul(&z1).unwrap();
        assert_eq!(independence_rank(&[z1.clone(), z2], DiffMode::Exact).unwrap().min_rank, 2);
        assert_eq!(independence_rank(&[z1, sq], DiffMode::Exact).unwrap().min_rank, 1);
    }

    #[test]
    fn monomial_enumeration() {
        assert_eq!(monomials(2, 2).len(), 6);
        assert_eq!(monomials(1, 3), vec![vec![0], vec![1], vec![2], vec![3]]);
    }
}
