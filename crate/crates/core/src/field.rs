//! Scalar, complex and matrix fields on a patch.
//!
//! A field is either backed by an expression (exact derivatives available) or
//! by one sample per grid node. Arithmetic stays symbolic while both operands
//! are expressions and falls back to samples otherwise.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr, Program};
use crate::grid::Patch;
use crate::par;

/// How derivatives are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiffMode {
    /// Symbolic differentiation of expression-backed fields.
    #[serde(rename = "exact")]
    Exact,
    /// Second-order finite differences on grid samples.
    #[serde(rename = "fd")]
    FiniteDifference,
}

impl fmt::Display for DiffMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiffMode::Exact => "exact",
            DiffMode::FiniteDifference => "fd",
        })
    }
}

impl std::str::FromStr for DiffMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<DiffMode> {
        match s {
            "exact" => Ok(DiffMode::Exact),
            "fd" => Ok(DiffMode::FiniteDifference),
            other => Err(Error::Precondition(format!(
                "unknown mode `{other}` (expected exact or fd)"
            ))),
        }
    }
}

#[derive(Clone)]
enum Repr {
    Expr(Expr),
    Samples(Arc<Vec<f64>>),
}

#[derive(Clone)]
pub struct ScalarField {
    patch: Arc<Patch>,
    repr: Repr,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Expr(e) => write!(f, "ScalarField({e})"),
            Repr::Samples(s) => write!(f, "ScalarField(<{} samples>)", s.len()),
        }
    }
}

fn same_patch(a: &Arc<Patch>, b: &Arc<Patch>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::PatchMismatch)
    }
}

fn node_error(patch: &Patch, flat: usize) -> Error {
    Error::NonFinite {
        node: patch.multi_index(flat),
    }
}

impl ScalarField {
    pub fn from_expr(patch: &Arc<Patch>, e: Expr) -> Result<ScalarField> {
        e.check_dim(patch.dim())?;
        Ok(ScalarField {
            patch: patch.clone(),
            repr: Repr::Expr(e),
        })
    }

    pub fn parse(patch: &Arc<Patch>, text: &str) -> Result<ScalarField> {
        ScalarField::from_expr(patch, parse_expr(text, patch.dim())?)
    }

    pub fn constant(patch: &Arc<Patch>, c: f64) -> ScalarField {
        ScalarField {
            patch: patch.clone(),
            repr: Repr::Expr(Expr::num(c)),
        }
    }

    pub fn zero(patch: &Arc<Patch>) -> ScalarField {
        ScalarField::constant(patch, 0.0)
    }

    /// The coordinate function `x{axis + 1}`.
    pub fn coordinate(patch: &Arc<Patch>, axis: usize) -> ScalarField {
        ScalarField {
            patch: patch.clone(),
            repr: Repr::Expr(Expr::var(axis)),
        }
    }

    pub fn from_samples(patch: &Arc<Patch>, samples: Vec<f64>) -> Result<ScalarField> {
        if samples.len() != patch.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a grid of {} nodes",
                samples.len(),
                patch.len()
            )));
        }
        Ok(ScalarField {
            patch: patch.clone(),
            repr: Repr::Samples(Arc::new(samples)),
        })
    }

    /// Samples `f` at every node.
    pub fn from_fn(patch: &Arc<Patch>, f: impl Fn(&[f64]) -> f64 + Sync + Send) -> ScalarField {
        let values = par::map_range(patch.len(), |k| f(&patch.point(k)));
        ScalarField {
            patch: patch.clone(),
            repr: Repr::Samples(Arc::new(values)),
        }
    }

    pub fn patch(&self) -> &Arc<Patch> {
        &self.patch
    }

    pub fn expr(&self) -> Option<&Expr> {
        match &self.repr {
            Repr::Expr(e) => Some(e),
            Repr::Samples(_) => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.expr().is_some()
    }

    /// Constant value when the field is a numeric literal.
    pub fn as_constant(&self) -> Option<f64> {
        self.expr().and_then(Expr::as_num)
    }

    /// Values at every grid node; errors on the first non-finite node.
    pub fn samples(&self) -> Result<Arc<Vec<f64>>> {
        match &self.repr {
            Repr::Samples(s) => Ok(s.clone()),
            Repr::Expr(_) => {
                let table = Evaluator::new(std::slice::from_ref(self))?.table(&self.patch.all_nodes())?;
                Ok(Arc::new(table.values))
            }
        }
    }

    /// Sample-backed copy of this field.
    pub fn sampled(&self) -> Result<ScalarField> {
        Ok(ScalarField {
            patch: self.patch.clone(),
            repr: Repr::Samples(self.samples()?),
        })
    }

    pub fn value_at(&self, flat: usize) -> Result<f64> {
        match &self.repr {
            Repr::Samples(s) => Ok(s[flat]),
            Repr::Expr(e) => {
                let v = e
                    .eval(&self.patch.point(flat))
                    .map_err(|_| node_error(&self.patch, flat))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(node_error(&self.patch, flat))
                }
            }
        }
    }

    /// Value at an arbitrary in-patch point: exact for expressions,
    /// multilinear interpolation for samples.
    pub fn value_at_point(&self, x: &[f64]) -> Result<f64> {
        if !self.patch.contains(x) {
            return Err(Error::OutsidePatch { point: x.to_vec() });
        }
        match &self.repr {
            Repr::Expr(e) => Ok(e.eval(x)?),
            Repr::Samples(s) => Ok(interpolate(&self.patch, s, x)),
        }
    }

    /// Partial derivative along `axis` (zero-based).
    pub fn partial(&self, axis: usize, mode: DiffMode) -> Result<ScalarField> {
        match (mode, &self.repr) {
            (DiffMode::Exact, Repr::Expr(e)) => Ok(ScalarField {
                patch: self.patch.clone(),
                repr: Repr::Expr(e.diff(axis)),
            }),
            (DiffMode::Exact, Repr::Samples(_)) => Err(Error::ModeUnavailable(
                "field is sample-backed; use finite differences".into(),
            )),
            (DiffMode::FiniteDifference, _) => {
                self.patch.require_fd()?;
                let s = self.samples()?;
                Ok(ScalarField {
                    patch: self.patch.clone(),
                    repr: Repr::Samples(Arc::new(fd_partial(&self.patch, &s, axis))),
                })
            }
        }
    }

    pub fn gradient(&self, mode: DiffMode) -> Result<Vec<ScalarField>> {
        (0..self.patch.dim()).map(|a| self.partial(a, mode)).collect()
    }

    fn zip_with(
        &self,
        other: &ScalarField,
        sym: impl Fn(&Expr, &Expr) -> Expr,
        num: impl Fn(f64, f64) -> f64 + Sync + Send,
    ) -> Result<ScalarField> {
        same_patch(&self.patch, &other.patch)?;
        if let (Repr::Expr(a), Repr::Expr(b)) = (&self.repr, &other.repr) {
            return Ok(ScalarField {
                patch: self.patch.clone(),
                repr: Repr::Expr(sym(a, b)),
            });
        }
        let a = self.samples()?;
        let b = other.samples()?;
        let values = par::map_range(a.len(), |k| num(a[k], b[k]));
        Ok(ScalarField {
            patch: self.patch.clone(),
            repr: Repr::Samples(Arc::new(values)),
        })
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, Expr::add, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, Expr::sub, |a, b| a - b)
    }

    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, Expr::mul, |a, b| a * b)
    }

    pub fn div(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, Expr::div, |a, b| a / b)
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        match &self.repr {
            Repr::Expr(e) => ScalarField {
                patch: self.patch.clone(),
                repr: Repr::Expr(Expr::mul(&Expr::num(c), e)),
            },
            Repr::Samples(s) => ScalarField {
                patch: self.patch.clone(),
                repr: Repr::Samples(Arc::new(s.iter().map(|v| c * v).collect())),
            },
        }
    }

    pub fn neg(&self) -> ScalarField {
        match &self.repr {
            Repr::Expr(e) => ScalarField {
                patch: self.patch.clone(),
                repr: Repr::Expr(Expr::neg(e)),
            },
            Repr::Samples(_) => self.scale(-1.0),
        }
    }

    /// Sum of fields; an empty list gives zero.
    pub fn sum(patch: &Arc<Patch>, terms: &[ScalarField]) -> Result<ScalarField> {
        terms
            .iter()
            .try_fold(ScalarField::zero(patch), |acc, t| acc.add(t))
    }
}

/// Central differences inside, one-sided second-order stencils on the faces.
pub fn fd_partial(patch: &Patch, f: &[f64], axis: usize) -> Vec<f64> {
    let stride = patch.stride(axis);
    let r = patch.resolution()[axis];
    let inv2h = 0.5 / patch.spacing(axis);
    par::map_range(f.len(), |k| {
        let i = patch.axis_index(k, axis);
        if i == 0 {
            (-3.0 * f[k] + 4.0 * f[k + stride] - f[k + 2 * stride]) * inv2h
        } else if i + 1 == r {
            (3.0 * f[k] - 4.0 * f[k - stride] + f[k - 2 * stride]) * inv2h
        } else {
            (f[k + stride] - f[k - stride]) * inv2h
        }
    })
}

/// Multilinear interpolation of node samples at an in-patch point.
pub fn interpolate(patch: &Patch, f: &[f64], x: &[f64]) -> f64 {
    let dim = patch.dim();
    let mut base = vec![0usize; dim];
    let mut frac = vec![0.0; dim];
    for a in 0..dim {
        let (lo, _) = patch.bounds()[a];
        let r = patch.resolution()[a];
        let t = ((x[a] - lo) / patch.spacing(a)).clamp(0.0, (r - 1) as f64);
        let i = (t.floor() as usize).min(r - 2);
        base[a] = i;
        frac[a] = t - i as f64;
    }
    let mut total = 0.0;
    for corner in 0..(1usize << dim) {
        let mut w = 1.0;
        let mut flat = 0;
        for a in 0..dim {
            let up = (corner >> a) & 1;
            w *= if up == 1 { frac[a] } else { 1.0 - frac[a] };
            flat += (base[a] + up) * patch.stride(a);
        }
        if w != 0.0 {
            total += w * f[flat];
        }
    }
    total
}

/// Values of several fields at a list of nodes, node-major.
#[derive(Debug, Clone)]
pub struct Table {
    pub width: usize,
    pub nodes: Vec<usize>,
    pub values: Vec<f64>,
}

impl Table {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.width..(i + 1) * self.width]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Batch evaluator compiling every expression-backed field into one program.
pub struct Evaluator {
    patch: Arc<Patch>,
    width: usize,
    program: Program,
    expr_dest: Vec<usize>,
    sample_src: Vec<(usize, Arc<Vec<f64>>)>,
}

impl Evaluator {
    pub fn new(fields: &[ScalarField]) -> Result<Evaluator> {
        let patch = fields
            .first()
            .map(|f| f.patch.clone())
            .ok_or_else(|| Error::Precondition("no fields to evaluate".into()))?;
        let mut exprs = Vec::new();
        let mut expr_dest = Vec::new();
        let mut sample_src = Vec::new();
        for (i, f) in fields.iter().enumerate() {
            same_patch(&patch, &f.patch)?;
            match &f.repr {
                Repr::Expr(e) => {
                    exprs.push(e.clone());
                    expr_dest.push(i);
                }
                Repr::Samples(s) => sample_src.push((i, s.clone())),
            }
        }
        Ok(Evaluator {
            program: Program::compile(&exprs, patch.dim()),
            patch,
            width: fields.len(),
            expr_dest,
            sample_src,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn patch(&self) -> &Arc<Patch> {
        &self.patch
    }

    fn eval_chunk(&self, nodes: &[usize]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; nodes.len() * self.width];
        let mut scratch = self.program.scratch();
        let mut prog_out = vec![0.0; self.program.n_outputs()];
        let mut x = vec![0.0; self.patch.dim()];
        for (row, &k) in nodes.iter().enumerate() {
            let dst = &mut out[row * self.width..(row + 1) * self.width];
            if !self.expr_dest.is_empty() {
                self.patch.point_into(k, &mut x);
                self.program
                    .eval_into(&x, &mut scratch, &mut prog_out)
                    .map_err(|_| node_error(&self.patch, k))?;
                for (&d, &v) in self.expr_dest.iter().zip(&prog_out) {
                    dst[d] = v;
                }
            }
            for (d, s) in &self.sample_src {
                dst[*d] = s[k];
            }
            if dst.iter().any(|v| !v.is_finite()) {
                return Err(node_error(&self.patch, k));
            }
        }
        Ok(out)
    }

    /// Evaluates all fields at `nodes` (node-parallel).
    pub fn table(&self, nodes: &[usize]) -> Result<Table> {
        let chunks = par::map_chunks(nodes, 512, |c| self.eval_chunk(c));
        let mut values = Vec::with_capacity(nodes.len() * self.width);
        for c in chunks {
            values.extend(c?);
        }
        Ok(Table {
            width: self.width,
            nodes: nodes.to_vec(),
            values,
        })
    }
}

/// `u + i v`.
#[derive(Debug, Clone)]
pub struct ComplexField {
    pub re: ScalarField,
    pub im: ScalarField,
}

impl ComplexField {
    pub fn new(re: ScalarField, im: ScalarField) -> Result<ComplexField> {
        same_patch(re.patch(), im.patch())?;
        Ok(ComplexField { re, im })
    }

    pub fn parse(patch: &Arc<Patch>, re: &str, im: &str) -> Result<ComplexField> {
        ComplexField::new(ScalarField::parse(patch, re)?, ScalarField::parse(patch, im)?)
    }

    pub fn real(re: ScalarField) -> ComplexField {
        let im = ScalarField::zero(re.patch());
        ComplexField { re, im }
    }

    pub fn constant(patch: &Arc<Patch>, re: f64, im: f64) -> ComplexField {
        ComplexField {
            re: ScalarField::constant(patch, re),
            im: ScalarField::constant(patch, im),
        }
    }

    pub fn patch(&self) -> &Arc<Patch> {
        self.re.patch()
    }

    pub fn is_exact(&self) -> bool {
        self.re.is_exact() && self.im.is_exact()
    }

    pub fn conj(&self) -> ComplexField {
        ComplexField {
            re: self.re.clone(),
            im: self.im.neg(),
        }
    }

    pub fn add(&self, o: &ComplexField) -> Result<ComplexField> {
        Ok(ComplexField {
            re: self.re.add(&o.re)?,
            im: self.im.add(&o.im)?,
        })
    }

    pub fn sub(&self, o: &ComplexField) -> Result<ComplexField> {
        Ok(ComplexField {
            re: self.re.sub(&o.re)?,
            im: self.im.sub(&o.im)?,
        })
    }

    pub fn mul(&self, o: &ComplexField) -> Result<ComplexField> {
        Ok(ComplexField {
            re: self.re.mul(&o.re)?.sub(&self.im.mul(&o.im)?)?,
            im: self.re.mul(&o.im)?.add(&self.im.mul(&o.re)?)?,
        })
    }

    /// Multiplication by the complex constant `a + ib`.
    pub fn scale(&self, a: f64, b: f64) -> Result<ComplexField> {
        Ok(ComplexField {
            re: self.re.scale(a).sub(&self.im.scale(b))?,
            im: self.re.scale(b).add(&self.im.scale(a))?,
        })
    }

    /// Multiplication by `i`.
    pub fn times_i(&self) -> ComplexField {
        ComplexField {
            re: self.im.neg(),
            im: self.re.clone(),
        }
    }

    pub fn partial(&self, axis: usize, mode: DiffMode) -> Result<ComplexField> {
        Ok(ComplexField {
            re: self.re.partial(axis, mode)?,
            im: self.im.partial(axis, mode)?,
        })
    }
}

/// Dense `rows × cols` array of scalar fields on one patch.
#[derive(Debug, Clone)]
pub struct MatrixField {
    rows: usize,
    cols: usize,
    entries: Vec<ScalarField>,
}

impl MatrixField {
    pub fn new(rows: usize, cols: usize, entries: Vec<ScalarField>) -> Result<MatrixField> {
        if entries.len() != rows * cols || entries.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        for e in &entries[1..] {
            same_patch(entries[0].patch(), e.patch())?;
        }
        Ok(MatrixField {
            rows,
            cols,
            entries,
        })
    }

    /// Parses a row-major array of expression strings.
    pub fn parse(patch: &Arc<Patch>, rows: &[Vec<String>]) -> Result<MatrixField> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::DimensionMismatch("ragged matrix rows".into()));
        }
        let entries = rows
            .iter()
            .flatten()
            .map(|t| ScalarField::parse(patch, t))
            .collect::<Result<Vec<_>>>()?;
        MatrixField::new(n_rows, n_cols, entries)
    }

    pub fn from_constant(patch: &Arc<Patch>, m: &DMatrix<f64>) -> MatrixField {
        let entries = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| ScalarField::constant(patch, m[(i, j)]))
            .collect();
        MatrixField {
            rows: m.nrows(),
            cols: m.ncols(),
            entries,
        }
    }

    pub fn identity(patch: &Arc<Patch>, n: usize) -> MatrixField {
        MatrixField::from_constant(patch, &DMatrix::identity(n, n))
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> ScalarField,
    ) -> Result<MatrixField> {
        let entries = (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .map(|(i, j)| f(i, j))
            .collect();
        MatrixField::new(rows, cols, entries)
    }

    pub fn try_from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Result<ScalarField>,
    ) -> Result<MatrixField> {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j)?);
            }
        }
        MatrixField::new(rows, cols, entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn patch(&self) -> &Arc<Patch> {
        self.entries[0].patch()
    }

    pub fn get(&self, i: usize, j: usize) -> &ScalarField {
        &self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[ScalarField] {
        &self.entries
    }

    pub fn is_exact(&self) -> bool {
        self.entries.iter().all(ScalarField::is_exact)
    }

    /// True when every entry is a numeric literal.
    pub fn is_constant(&self) -> bool {
        self.entries.iter().all(|e| e.as_constant().is_some())
    }

    pub fn transpose(&self) -> MatrixField {
        let entries = (0..self.cols)
            .flat_map(|j| (0..self.rows).map(move |i| (i, j)))
            .map(|(i, j)| self.get(i, j).clone())
            .collect();
        MatrixField {
            rows: self.cols,
            cols: self.rows,
            entries,
        }
    }

    fn check_shape(&self, o: &MatrixField) -> Result<()> {
        if self.rows != o.rows || self.cols != o.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, o.rows, o.cols
            )));
        }
        Ok(())
    }

    pub fn add(&self, o: &MatrixField) -> Result<MatrixField> {
        self.check_shape(o)?;
        let entries = self
            .entries
            .iter()
            .zip(&o.entries)
            .map(|(a, b)| a.add(b))
            .collect::<Result<_>>()?;
        MatrixField::new(self.rows, self.cols, entries)
    }

    pub fn sub(&self, o: &MatrixField) -> Result<MatrixField> {
        self.check_shape(o)?;
        let entries = self
            .entries
            .iter()
            .zip(&o.entries)
            .map(|(a, b)| a.sub(b))
            .collect::<Result<_>>()?;
        MatrixField::new(self.rows, self.cols, entries)
    }

    pub fn scale(&self, c: f64) -> MatrixField {
        MatrixField {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e.scale(c)).collect(),
        }
    }

    pub fn neg(&self) -> MatrixField {
        MatrixField {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(ScalarField::neg).collect(),
        }
    }

    pub fn mul(&self, o: &MatrixField) -> Result<MatrixField> {
        if self.cols != o.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, o.rows, o.cols
            )));
        }
        MatrixField::try_from_fn(self.rows, o.cols, |i, j| {
            let terms = (0..self.cols)
                .map(|k| self.get(i, k).mul(o.get(k, j)))
                .collect::<Result<Vec<_>>>()?;
            ScalarField::sum(self.patch(), &terms)
        })
    }

    /// Sub-block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> MatrixField {
        let entries = (r0..r0 + nr)
            .flat_map(|i| (c0..c0 + nc).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j).clone())
            .collect();
        MatrixField {
            rows: nr,
            cols: nc,
            entries,
        }
    }

    /// `[[a, b], [c, d]]` from four blocks with matching shapes.
    pub fn from_blocks(
        a: &MatrixField,
        b: &MatrixField,
        c: &MatrixField,
        d: &MatrixField,
    ) -> Result<MatrixField> {
        if a.rows != b.rows || c.rows != d.rows || a.cols != c.cols || b.cols != d.cols {
            return Err(Error::DimensionMismatch("block shapes disagree".into()));
        }
        let rows = a.rows + c.rows;
        let cols = a.cols + b.cols;
        MatrixField::from_fn(rows, cols, |i, j| {
            let (m, ii, jj) = match (i < a.rows, j < a.cols) {
                (true, true) => (a, i, j),
                (true, false) => (b, i, j - a.cols),
                (false, true) => (c, i - a.rows, j),
                (false, false) => (d, i - a.rows, j - a.cols),
            };
            m.get(ii, jj).clone()
        })
    }

    pub fn partial(&self, axis: usize, mode: DiffMode) -> Result<MatrixField> {
        let entries = self
            .entries
            .iter()
            .map(|e| e.partial(axis, mode))
            .collect::<Result<_>>()?;
        MatrixField::new(self.rows, self.cols, entries)
    }

    pub fn sampled(&self) -> Result<MatrixField> {
        let entries = self
            .entries
            .iter()
            .map(ScalarField::sampled)
            .collect::<Result<_>>()?;
        MatrixField::new(self.rows, self.cols, entries)
    }

    pub fn evaluator(&self) -> Result<Evaluator> {
        Evaluator::new(&self.entries)
    }

    /// Matrix value at one node.
    pub fn at(&self, flat: usize) -> Result<DMatrix<f64>> {
        let t = self.evaluator()?.table(&[flat])?;
        Ok(DMatrix::from_row_slice(self.rows, self.cols, t.row(0)))
    }

    /// Matrix values at every listed node.
    pub fn at_nodes(&self, nodes: &[usize]) -> Result<Vec<DMatrix<f64>>> {
        let t = self.evaluator()?.table(nodes)?;
        Ok((0..nodes.len())
            .map(|i| DMatrix::from_row_slice(self.rows, self.cols, t.row(i)))
            .collect())
    }

    /// Row-major expression strings, when every entry is expression-backed.
    pub fn to_strings(&self) -> Option<Vec<Vec<String>>> {
        (0..self.rows)
            .map(|i| {
                (0..self.cols)
                    .map(|j| self.get(i, j).expr().map(|e| e.to_string()))
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square(r: usize) -> Arc<Patch> {
        Arc::new(Patch::cube(2, 0.0, 1.0, r).unwrap())
    }

    #[test]
    fn eval_field_samples_every_node() {
        let p = unit_square(3);
        let f = ScalarField::parse(&p, "x1+x2").unwrap().samples().unwrap();
        assert_eq!((f[0], f[2], f[6], f[8]), (0.0, 1.0, 1.0, 2.0));
        let c = ScalarField::parse(&p, "7").unwrap().samples().unwrap();
        assert!(c.iter().all(|&v| v == 7.0));
    }

    #[test]
    fn eval_field_reports_the_failing_node() {
        let p = Arc::new(Patch::cube(2, -1.0, 1.0, 5).unwrap());
        let err = ScalarField::parse(&p, "1/x1").unwrap().samples().unwrap_err();
        match err {
            Error::NonFinite { node } => assert_eq!(node[0], 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fd_is_exact_on_quadratics() {
        let p = unit_square(9);
        let u = ScalarField::parse(&p, "x1^2").unwrap();
        let du = u.partial(0, DiffMode::FiniteDifference).unwrap().samples().unwrap();
        for k in 0..p.len() {
            let x = p.point(k);
            assert!((du[k] - 2.0 * x[0]).abs() < 1e-12);
        }
        assert!(matches!(
            u.sampled().unwrap().partial(0, DiffMode::Exact),
            Err(Error::ModeUnavailable(_))
        ));
    }

    #[test]
    fn interpolation_is_exact_on_multilinear_data() {
        let p = unit_square(5);
        let f = ScalarField::parse(&p, "1 + 2*x1 - x2 + 3*x1*x2").unwrap();
        let s = f.sampled().unwrap();
        let x = [0.33, 0.71];
        let want = 1.0 + 2.0 * 0.33 - 0.71 + 3.0 * 0.33 * 0.71;
        assert!((s.value_at_point(&x).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn matrix_blocks_reassemble() {
        let p = unit_square(5);
        let m = MatrixField::parse(
            &p,
            &[
                vec!["x2".into(), "x2^2+1".into()],
                vec!["-1".into(), "-x2".into()],
            ],
        )
        .unwrap();
        let sq = m.mul(&m).unwrap();
        for v in sq.at_nodes(&p.all_nodes()).unwrap() {
            assert!((v + DMatrix::identity(2, 2)).abs().max() < 1e-12);
        }
        let back = MatrixField::from_blocks(
            &m.block(0, 0, 1, 1),
            &m.block(0, 1, 1, 1),
            &m.block(1, 0, 1, 1),
            &m.block(1, 1, 1, 1),
        )
        .unwrap();
        assert_eq!(back.at(7).unwrap(), m.at(7).unwrap());
    }
}
