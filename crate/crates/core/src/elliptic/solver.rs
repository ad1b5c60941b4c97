//! Dirichlet problems `Δ_J u = f` on the interior with `u = g` on the boundary.
//!
//! Up to [`DIRECT_LIMIT`] unknowns the system is factorized by banded LU with
//! partial pivoting (the stencil couples an unknown only to neighbors within
//! one stride of the slowest interior axis). Larger systems use restarted
//! GMRES with Jacobi preconditioning.

use serde::Serialize;

use super::EllipticOperator;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Patch;
use crate::par;

/// Largest system solved directly.
pub const DIRECT_LIMIT: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// Direct for small systems, GMRES otherwise.
    Auto,
    BandedLu,
    Gmres,
}

#[derive(Debug, Clone)]
pub struct DirichletProblem<'a> {
    pub op: &'a EllipticOperator,
    /// Only its boundary values are used.
    pub boundary: ScalarField,
    /// Right-hand side on interior nodes; zero when absent.
    pub source: Option<ScalarField>,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub restart: usize,
    pub method: SolveMethod,
}

impl<'a> DirichletProblem<'a> {
    pub fn new(op: &'a EllipticOperator, boundary: ScalarField) -> DirichletProblem<'a> {
        DirichletProblem {
            op,
            boundary,
            source: None,
            tolerance: 1e-8,
            max_iterations: 20_000,
            restart: 60,
            method: SolveMethod::Auto,
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SolveStats {
    pub method: SolveMethod,
    pub unknowns: usize,
    pub iterations: usize,
    /// `‖b − Ax‖ / ‖b‖` of the interior system.
    pub relative_residual: f64,
    pub monotone: bool,
    pub peclet: f64,
    pub peclet_warning: bool,
    pub boundary_min: f64,
    pub boundary_max: f64,
    pub interior_min: f64,
    pub interior_max: f64,
    /// `boundary_min − slack ≤ u ≤ boundary_max + slack` with slack `10 · tolerance`.
    pub max_principle_holds: bool,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub field: ScalarField,
    pub stats: SolveStats,
}

/// Interior system in unknown numbering.
struct System<'a> {
    patch: &'a Patch,
    op: &'a EllipticOperator,
    /// flat node -> unknown index, usize::MAX on the boundary
    unknown: Vec<usize>,
}

impl<'a> System<'a> {
    fn new(patch: &'a Patch, op: &'a EllipticOperator) -> System<'a> {
        let mut unknown = vec![usize::MAX; patch.len()];
        for (i, &k) in op.stencil.nodes.iter().enumerate() {
            unknown[k] = i;
        }
        System { patch, op, unknown }
    }

    fn n(&self) -> usize {
        self.op.stencil.nodes.len()
    }

    /// Right-hand side with boundary contributions moved over.
    fn rhs(&self, g: &[f64], f: Option<&[f64]>) -> Vec<f64> {
        let st = &self.op.stencil;
        par::map_range(self.n(), |i| {
            let k = st.nodes[i] as isize;
            let mut b = f.map_or(0.0, |f| f[st.nodes[i]]);
            for (c, o) in st.row(i).iter().zip(&st.offsets) {
                let nb = (k + o) as usize;
                if self.unknown[nb] == usize::MAX {
                    b -= c * g[nb];
                }
            }
            b
        })
    }

    fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let st = &self.op.stencil;
        par::map_range(self.n(), |i| {
            let k = st.nodes[i] as isize;
            let mut v = 0.0;
            for (c, o) in st.row(i).iter().zip(&st.offsets) {
                let j = self.unknown[(k + o) as usize];
                if j != usize::MAX {
                    v += c * x[j];
                }
            }
            v
        })
    }

    fn bandwidth(&self) -> usize {
        let st = &self.op.stencil;
        let mut bw = 0;
        for (i, &k) in st.nodes.iter().enumerate() {
            for o in &st.offsets {
                let j = self.unknown[(k as isize + o) as usize];
                if j != usize::MAX {
                    bw = bw.max(j.abs_diff(i));
                }
            }
        }
        bw
    }

    fn banded_lu(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        let bw = self.bandwidth();
        let mut m = Banded::new(n, bw, bw);
        let st = &self.op.stencil;
        for (i, &k) in st.nodes.iter().enumerate() {
            for (c, o) in st.row(i).iter().zip(&st.offsets) {
                let j = self.unknown[(k as isize + o) as usize];
                if j != usize::MAX {
                    *m.at(i, j) += c;
                }
            }
        }
        m.solve(b.to_vec()).map_err(|row| Error::Singular {
            what: "discrete operator".into(),
            node: self.patch.multi_index(st.nodes[row]),
            hint: None,
        })
    }

    fn gmres(&self, b: &[f64], tol: f64, max_it: usize, restart: usize) -> Result<(Vec<f64>, usize)> {
        let n = self.n();
        let diag: Vec<f64> = (0..n)
            .map(|i| {
                let c = self.op.stencil.row(i)[0];
                if c != 0.0 {
                    1.0 / c
                } else {
                    1.0
                }
            })
            .collect();
        let bnorm = norm(b).max(f64::MIN_POSITIVE);
        let mut x = vec![0.0; n];
        let mut best = (f64::INFINITY, x.clone());
        let mut it = 0;
        let m = restart.max(1);
        while it < max_it {
            let ax = self.matvec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let beta = norm(&r);
            if beta / bnorm < best.0 {
                best = (beta / bnorm, x.clone());
            }
            if beta / bnorm <= tol {
                return Ok((x, it));
            }
            let mut v = vec![r.iter().map(|v| v / beta).collect::<Vec<_>>()];
            let mut h = vec![vec![0.0; m]; m + 1];
            let mut cs = vec![0.0; m];
            let mut sn = vec![0.0; m];
            let mut g = vec![0.0; m + 1];
            g[0] = beta;
            let mut k_used = 0;
            for k in 0..m {
                it += 1;
                let z: Vec<f64> = v[k].iter().zip(&diag).map(|(a, d)| a * d).collect();
                let mut w = self.matvec(&z);
                for (i, vi) in v.iter().enumerate() {
                    let hij = dot(&w, vi);
                    h[i][k] = hij;
                    for (wj, vj) in w.iter_mut().zip(vi) {
                        *wj -= hij * vj;
                    }
                }
                let wn = norm(&w);
                h[k + 1][k] = wn;
                for i in 0..k {
                    let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                    h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                    h[i][k] = t;
                }
                let denom = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
                if denom == 0.0 {
                    k_used = k;
                    break;
                }
                cs[k] = h[k][k] / denom;
                sn[k] = h[k + 1][k] / denom;
                h[k][k] = denom;
                h[k + 1][k] = 0.0;
                g[k + 1] = -sn[k] * g[k];
                g[k] *= cs[k];
                k_used = k + 1;
                if g[k + 1].abs() / bnorm <= tol * 0.5 || wn == 0.0 || it >= max_it {
                    break;
                }
                v.push(w.iter().map(|x| x / wn).collect());
            }
            let mut y = vec![0.0; k_used];
            for i in (0..k_used).rev() {
                let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
                y[i] = (g[i] - s) / h[i][i];
            }
            for (j, yj) in y.iter().enumerate() {
                for ((xi, vi), d) in x.iter_mut().zip(&v[j]).zip(&diag) {
                    *xi += yj * vi * d;
                }
            }
        }
        let ax = self.matvec(&x);
        let res = norm(&b.iter().zip(&ax).map(|(b, a)| b - a).collect::<Vec<_>>()) / bnorm;
        if res <= tol {
            return Ok((x, it));
        }
        if res < best.0 {
            best = (res, x);
        }
        Err(Error::NoConvergence {
            iterations: it,
            residual: best.0,
            best: best.1,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Band matrix with room for pivoting fill-in: row `i` stores columns
/// `i − kl ..= i + kl + ku`.
struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    w: usize,
    data: Vec<f64>,
}

impl Banded {
    fn new(n: usize, kl: usize, ku: usize) -> Banded {
        let w = 2 * kl + ku + 1;
        Banded {
            n,
            kl,
            ku,
            w,
            data: vec![0.0; n * w],
        }
    }

    fn pos(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.w + (j + self.kl - i)
    }

    fn at(&mut self, i: usize, j: usize) -> &mut f64 {
        let p = self.pos(i, j);
        &mut self.data[p]
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.pos(i, j)]
    }

    /// Gaussian elimination with partial pivoting applied to `b` on the fly.
    /// On a zero pivot returns the offending row.
    fn solve(mut self, mut b: Vec<f64>) -> std::result::Result<Vec<f64>, usize> {
        let n = self.n;
        let reach = self.kl + self.ku;
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let last_col = (k + reach).min(n - 1);
            let mut piv = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last_row {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best <= 1e-14 * scale {
                return Err(k);
            }
            if piv != k {
                for j in k..=last_col {
                    let (a, c) = (self.pos(k, j), self.pos(piv, j));
                    self.data.swap(a, c);
                }
                b.swap(k, piv);
            }
            let pivot = self.get(k, k);
            for i in k + 1..=last_row {
                let f = self.get(i, k) / pivot;
                if f == 0.0 {
                    continue;
                }
                *self.at(i, k) = 0.0;
                for j in k + 1..=last_col {
                    let u = self.get(k, j);
                    if u != 0.0 {
                        *self.at(i, j) -= f * u;
                    }
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let last_col = (i + reach).min(n - 1);
            let s: f64 = (i + 1..=last_col).map(|j| self.get(i, j) * x[j]).sum();
            x[i] = (b[i] - s) / self.get(i, i);
        }
        Ok(x)
    }
}

/// Solves the discrete Dirichlet problem.
pub fn solve_dirichlet(p: &DirichletProblem<'_>) -> Result<Solution> {
    let patch = p.op.a.patch().clone();
    if **p.boundary.patch() != *patch {
        return Err(Error::PatchMismatch);
    }
    let sys = System::new(&patch, p.op);
    let g = p.boundary.samples()?;
    let f = match &p.source {
        Some(s) => Some(s.samples()?),
        None => None,
    };
    let bnodes = patch.boundary_nodes();
    for &k in &bnodes {
        if !g[k].is_finite() {
            return Err(Error::NonFinite {
                node: patch.multi_index(k),
            });
        }
    }
    let b = sys.rhs(&g, f.as_deref().map(|v| v.as_slice()));
    let n = sys.n();
    let method = match p.method {
        SolveMethod::Auto if n <= DIRECT_LIMIT => SolveMethod::BandedLu,
        SolveMethod::Auto => SolveMethod::Gmres,
        m => m,
    };
    let (x, iterations) = match method {
        SolveMethod::BandedLu => (sys.banded_lu(&b)?, 1),
        _ => sys.gmres(&b, p.tolerance, p.max_iterations, p.restart)?,
    };
    let ax = sys.matvec(&x);
    let bnorm = norm(&b);
    let rnorm = norm(&b.iter().zip(&ax).map(|(b, a)| b - a).collect::<Vec<_>>());
    let relative_residual = if bnorm > 0.0 { rnorm / bnorm } else { rnorm };
    let mut full = g.to_vec();
    for (i, &k) in p.op.stencil.nodes.iter().enumerate() {
        full[k] = x[i];
    }
    let (bmin, bmax) = bnodes
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &k| (lo.min(g[k]), hi.max(g[k])));
    let (imin, imax) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let slack = 10.0 * p.tolerance * (1.0 + bmax.abs().max(bmin.abs()));
    let stats = SolveStats {
        method,
        unknowns: n,
        iterations,
        relative_residual,
        monotone: p.op.stencil.is_monotone(),
        peclet: p.op.peclet,
        peclet_warning: p.op.peclet_warning(),
        boundary_min: bmin,
        boundary_max: bmax,
        interior_min: imin,
        interior_max: imax,
        max_principle_holds: imax <= bmax + slack && imin >= bmin - slack,
    };
    Ok(Solution {
        field: ScalarField::from_samples(&patch, full)?,
        stats,
    })
}
