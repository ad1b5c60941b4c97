//! Second-order stencil of `Σ A_sp ∂_s∂_p + Σ B_p ∂_p` on interior nodes.
//!
//! Neighbor order: center, then `−e_s, +e_s` for every axis, then for every
//! pair `s < p` the diagonals `(+,+), (−,−), (+,−), (−,+)`.

use crate::grid::Patch;
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    /// Flat index offsets of the neighbors.
    pub offsets: Vec<isize>,
    /// Interior nodes, in increasing order.
    pub nodes: Vec<usize>,
    /// Node-major coefficients, `offsets.len()` per node.
    pub coeffs: Vec<f64>,
}

/// Neighbor offsets in the documented order.
pub fn neighbor_offsets(patch: &Patch) -> Vec<isize> {
    let d = patch.dim();
    let st = |a: usize| patch.stride(a) as isize;
    let mut off = vec![0isize];
    for s in 0..d {
        off.push(-st(s));
        off.push(st(s));
    }
    for s in 0..d {
        for p in s + 1..d {
            off.push(st(s) + st(p));
            off.push(-st(s) - st(p));
            off.push(st(s) - st(p));
            off.push(-st(s) + st(p));
        }
    }
    off
}

fn clean(v: f64) -> f64 {
    // -0.0 + 0.0 == +0.0; keeps zero coefficients bitwise canonical
    v + 0.0
}

/// Coefficients at one node from `A` (row-major, `d × d`) and `B`.
pub fn node_coefficients(patch: &Patch, a: &[f64], b: &[f64], out: &mut [f64]) {
    let d = patch.dim();
    let mut center = 0.0;
    for s in 0..d {
        let h = patch.spacing(s);
        let inv_h2 = 1.0 / (h * h);
        let inv_2h = 0.5 / h;
        let a_ss = a[s * d + s];
        center += -2.0 * a_ss * inv_h2;
        out[1 + 2 * s] = clean(a_ss * inv_h2 - b[s] * inv_2h);
        out[2 + 2 * s] = clean(a_ss * inv_h2 + b[s] * inv_2h);
    }
    out[0] = clean(center);
    let mut k = 1 + 2 * d;
    for s in 0..d {
        for p in s + 1..d {
            let c = a[s * d + p] / (2.0 * patch.spacing(s) * patch.spacing(p));
            out[k] = clean(c);
            out[k + 1] = clean(c);
            out[k + 2] = clean(-c);
            out[k + 3] = clean(-c);
            k += 4;
        }
    }
}

impl Stencil {
    /// Builds the stencil from node-major tables of `A` (`d²` values) and
    /// `B` (`d` values) over the interior nodes.
    pub fn build(patch: &Patch, nodes: Vec<usize>, a: &[f64], b: &[f64]) -> Stencil {
        let d = patch.dim();
        let offsets = neighbor_offsets(patch);
        let w = offsets.len();
        let rows = par::map_range(nodes.len(), |i| {
            let mut out = vec![0.0; w];
            node_coefficients(patch, &a[i * d * d..(i + 1) * d * d], &b[i * d..(i + 1) * d], &mut out);
            out
        });
        Stencil {
            offsets,
            nodes,
            coeffs: rows.concat(),
        }
    }

    pub fn width(&self) -> usize {
        self.offsets.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.coeffs[i * w..(i + 1) * w]
    }

    /// Applies the stencil to node values `u` (full grid); one value per interior node.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        par::map_range(self.nodes.len(), |i| {
            let k = self.nodes[i] as isize;
            self.row(i)
                .iter()
                .zip(&self.offsets)
                .map(|(c, o)| c * u[(k + o) as usize])
                .sum()
        })
    }

    /// Off-center coefficients all nonnegative (and the center nonpositive) at every node.
    pub fn is_monotone(&self) -> bool {
        (0..self.nodes.len()).all(|i| {
            let r = self.row(i);
            r[0] <= 0.0 && r[1..].iter().all(|&c| c >= 0.0)
        })
    }

    /// Largest `|Σ coefficients|` over nodes (zero for an operator without
    /// zeroth-order term, up to rounding).
    pub fn row_sum_defect(&self) -> f64 {
        (0..self.nodes.len())
            .map(|i| self.row(i).iter().sum::<f64>().abs())
            .fold(0.0, f64::max)
    }
}
