//! Small dense linear algebra on matrix fields.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::field::{MatrixField, ScalarField};
use crate::grid::Patch;
use crate::par;

pub type C64 = Complex<f64>;

/// Largest block size inverted symbolically (adjugate over determinant).
pub const SYMBOLIC_INVERSE_MAX: usize = 4;

/// Relative determinant threshold for singularity.
pub const SINGULAR_DET: f64 = 1e-12;

/// Condition-number ceiling for invertibility.
pub const MAX_CONDITION: f64 = 1e12;

/// Maximum absolute row sum.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn inf_norm_c(m: &DMatrix<C64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Maximum absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

pub fn complexify(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

/// 2-norm condition number from singular values.
pub fn condition(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// True when `|det| ≤ 1e-12·scaleⁿ` or the condition estimate exceeds 1e12.
pub fn is_singular(m: &DMatrix<f64>) -> bool {
    let n = m.nrows() as i32;
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    let det = m.clone().lu().determinant();
    det.abs() <= SINGULAR_DET * scale.powi(n) || condition(m) >= MAX_CONDITION
}

/// Determinant by cofactor expansion along the first row.
pub fn det_field(m: &MatrixField) -> Result<ScalarField> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch("determinant of a non-square matrix".into()));
    }
    let n = m.rows();
    if n == 1 {
        return Ok(m.get(0, 0).clone());
    }
    if n == 2 {
        return m
            .get(0, 0)
            .mul(m.get(1, 1))?
            .sub(&m.get(0, 1).mul(m.get(1, 0))?);
    }
    let mut acc = ScalarField::zero(m.patch());
    for j in 0..n {
        let term = m.get(0, j).mul(&det_field(&minor(m, 0, j)?)?)?;
        acc = if j % 2 == 0 { acc.add(&term)? } else { acc.sub(&term)? };
    }
    Ok(acc)
}

fn minor(m: &MatrixField, row: usize, col: usize) -> Result<MatrixField> {
    let n = m.rows();
    MatrixField::from_fn(n - 1, n - 1, |i, j| {
        let ii = if i < row { i } else { i + 1 };
        let jj = if j < col { j } else { j + 1 };
        m.get(ii, jj).clone()
    })
}

/// Finds the first node where `m` is singular.
pub fn check_invertible(m: &MatrixField, nodes: &[usize], what: &str) -> Result<f64> {
    let values = m.at_nodes(nodes)?;
    let conds = par::map_slice(&values, |v| {
        if is_singular(v) {
            f64::INFINITY
        } else {
            condition(v)
        }
    });
    let mut worst: f64 = 1.0;
    for (k, c) in nodes.iter().zip(&conds) {
        if !c.is_finite() {
            return Err(Error::Singular {
                what: what.to_string(),
                node: m.patch().multi_index(*k),
                hint: None,
            });
        }
        worst = worst.max(*c);
    }
    Ok(worst)
}

/// Pointwise inverse. Expression-backed blocks up to 4×4 stay symbolic;
/// otherwise every node is inverted by LU and the result is sample-backed.
/// Singularity is checked at every grid node either way.
pub fn inverse_field(m: &MatrixField, what: &str) -> Result<MatrixField> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!("{what} is not square")));
    }
    let patch = m.patch().clone();
    check_invertible(m, &patch.all_nodes(), what)?;
    let n = m.rows();
    if m.is_exact() && n <= SYMBOLIC_INVERSE_MAX {
        if n == 1 {
            let one = ScalarField::constant(&patch, 1.0);
            return MatrixField::new(1, 1, vec![one.div(m.get(0, 0))?]);
        }
        let det = det_field(m)?;
        return MatrixField::try_from_fn(n, n, |i, j| {
            // inverse[i][j] = cofactor[j][i] / det
            let c = det_field(&minor(m, j, i)?)?;
            let c = if (i + j) % 2 == 0 { c } else { c.neg() };
            c.div(&det)
        });
    }
    pointwise_inverse(m, &patch)
}

fn pointwise_inverse(m: &MatrixField, patch: &std::sync::Arc<Patch>) -> Result<MatrixField> {
    let n = m.rows();
    let values = m.at_nodes(&patch.all_nodes())?;
    let inv = par::map_slice(&values, |v| v.clone().lu().try_inverse());
    let mut cols = vec![Vec::with_capacity(patch.len()); n * n];
    for (k, iv) in inv.into_iter().enumerate() {
        let iv = iv.ok_or_else(|| Error::Singular {
            what: "matrix".into(),
            node: patch.multi_index(k),
            hint: None,
        })?;
        for i in 0..n {
            for j in 0..n {
                cols[i * n + j].push(iv[(i, j)]);
            }
        }
    }
    let entries = cols
        .into_iter()
        .map(|c| ScalarField::from_samples(patch, c))
        .collect::<Result<_>>()?;
    MatrixField::new(n, n, entries)
}
