//! Gradients, one-forms, their exterior derivatives and line integrals.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{DiffMode, ScalarField};
use crate::grid::Patch;

/// Gradient of `u`; exact mode differentiates the expression symbolically.
pub fn gradient(u: &ScalarField, mode: DiffMode) -> Result<Vec<ScalarField>> {
    u.gradient(mode)
}

/// `Σ ω_q dx^q`.
#[derive(Debug, Clone)]
pub struct OneForm {
    comps: Vec<ScalarField>,
}

impl OneForm {
    pub fn new(comps: Vec<ScalarField>) -> Result<OneForm> {
        let patch = comps
            .first()
            .ok_or_else(|| Error::DimensionMismatch("empty one-form".into()))?
            .patch()
            .clone();
        if comps.len() != patch.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} components on a {}-dimensional patch",
                comps.len(),
                patch.dim()
            )));
        }
        if comps.iter().any(|c| **c.patch() != *patch) {
            return Err(Error::PatchMismatch);
        }
        Ok(OneForm { comps })
    }

    pub fn parse(patch: &Arc<Patch>, comps: &[&str]) -> Result<OneForm> {
        OneForm::new(
            comps
                .iter()
                .map(|c| ScalarField::parse(patch, c))
                .collect::<Result<_>>()?,
        )
    }

    /// `du`.
    pub fn exact(u: &ScalarField, mode: DiffMode) -> Result<OneForm> {
        OneForm::new(u.gradient(mode)?)
    }

    pub fn patch(&self) -> &Arc<Patch> {
        self.comps[0].patch()
    }

    pub fn comps(&self) -> &[ScalarField] {
        &self.comps
    }

    pub fn comp(&self, q: usize) -> &ScalarField {
        &self.comps[q]
    }

    pub fn add(&self, o: &OneForm) -> Result<OneForm> {
        OneForm::new(
            self.comps
                .iter()
                .zip(&o.comps)
                .map(|(a, b)| a.add(b))
                .collect::<Result<_>>()?,
        )
    }
}

/// Antisymmetric coefficients `R_sq`, stored for `s < q`.
#[derive(Debug, Clone)]
pub struct TwoForm {
    dim: usize,
    upper: Vec<ScalarField>,
    patch: Arc<Patch>,
}

fn upper_index(dim: usize, s: usize, q: usize) -> usize {
    debug_assert!(s < q);
    s * dim - s * (s + 1) / 2 + (q - s - 1)
}

impl TwoForm {
    /// Builds a form from its upper-triangle components in `(0,1), (0,2), …` order.
    pub fn from_upper(patch: &Arc<Patch>, upper: Vec<ScalarField>) -> Result<TwoForm> {
        let dim = patch.dim();
        if upper.len() != dim * (dim - 1) / 2 {
            return Err(Error::DimensionMismatch(format!(
                "{} components for a 2-form in dimension {dim}",
                upper.len()
            )));
        }
        if upper.iter().any(|f| **f.patch() != **patch) {
            return Err(Error::PatchMismatch);
        }
        Ok(TwoForm {
            dim,
            upper,
            patch: patch.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn patch(&self) -> &Arc<Patch> {
        &self.patch
    }

    /// `R_sq`; the lower triangle is the negated upper one and the diagonal is zero.
    pub fn get(&self, s: usize, q: usize) -> ScalarField {
        match s.cmp(&q) {
            std::cmp::Ordering::Less => self.upper[upper_index(self.dim, s, q)].clone(),
            std::cmp::Ordering::Greater => self.upper[upper_index(self.dim, q, s)].neg(),
            std::cmp::Ordering::Equal => ScalarField::zero(&self.patch),
        }
    }

    /// Stored components `(s, q, R_sq)` with `s < q`.
    pub fn upper(&self) -> impl Iterator<Item = (usize, usize, &ScalarField)> {
        let dim = self.dim;
        (0..dim)
            .flat_map(move |s| (s + 1..dim).map(move |q| (s, q)))
            .zip(&self.upper)
            .map(|((s, q), f)| (s, q, f))
    }
}

/// `dω` with `R_sq = ∂ω_q/∂x^s − ∂ω_s/∂x^q`.
pub fn d_oneform(w: &OneForm, mode: DiffMode) -> Result<TwoForm> {
    let dim = w.comps.len();
    if mode == DiffMode::FiniteDifference {
        w.patch().require_fd()?;
    }
    let mut upper = Vec::with_capacity(dim * (dim - 1) / 2);
    for s in 0..dim {
        for q in s + 1..dim {
            let a = w.comps[q].partial(s, mode)?;
            let b = w.comps[s].partial(q, mode)?;
            upper.push(a.sub(&b)?);
        }
    }
    Ok(TwoForm {
        dim,
        upper,
        patch: w.patch().clone(),
    })
}

/// Composite trapezoid rule for `∫ ω` along a polyline, with `subdivisions`
/// panels per segment.
pub fn line_integral(w: &OneForm, polyline: &[Vec<f64>], subdivisions: usize) -> Result<f64> {
    let patch = w.patch();
    for p in polyline {
        if !patch.contains(p) {
            return Err(Error::OutsidePatch { point: p.clone() });
        }
    }
    let n = subdivisions.max(1);
    let dim = patch.dim();
    let mut total = 0.0;
    let mut x = vec![0.0; dim];
    for seg in polyline.windows(2) {
        let (a, b) = (&seg[0], &seg[1]);
        let delta: Vec<f64> = a.iter().zip(b).map(|(p, q)| q - p).collect();
        if delta.iter().all(|d| *d == 0.0) {
            continue;
        }
        let mut seg_sum = 0.0;
        for k in 0..=n {
            let t = k as f64 / n as f64;
            for i in 0..dim {
                x[i] = a[i] + t * delta[i];
            }
            let mut integrand = 0.0;
            for (c, d) in w.comps.iter().zip(&delta) {
                if *d != 0.0 {
                    integrand += c.value_at_point(&x)? * d;
                }
            }
            let weight = if k == 0 || k == n { 0.5 } else { 1.0 };
            seg_sum += weight * integrand;
        }
        total += seg_sum / n as f64;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(r: usize) -> Arc<Patch> {
        Arc::new(Patch::cube(2, 0.0, 1.0, r).unwrap())
    }

    fn loop_unit() -> Vec<Vec<f64>> {
        vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![0.0, 0.0],
        ]
    }

    #[test]
    fn d_of_rotation_form() {
        let p = square(5);
        let w = OneForm::parse(&p, &["-x2", "x1"]).unwrap();
        let r = d_oneform(&w, DiffMode::Exact).unwrap();
        assert_eq!(r.get(0, 1).as_constant(), Some(2.0));
        assert_eq!(r.get(1, 0).as_constant(), Some(-2.0));
        let w2 = OneForm::parse(&p, &["x2^2", "0"]).unwrap();
        let r2 = d_oneform(&w2, DiffMode::Exact).unwrap();
        let v = r2.get(0, 1).value_at(7).unwrap();
        assert_eq!(v, -2.0 * p.point(7)[1]);
    }

    #[test]
    fn dd_vanishes() {
        let p = square(9);
        let u = ScalarField::parse(&p, "x1*x2").unwrap();
        let r = d_oneform(&OneForm::exact(&u, DiffMode::Exact).unwrap(), DiffMode::Exact).unwrap();
        assert!(r.get(0, 1).expr().unwrap().is_zero());
    }

    #[test]
    fn green_theorem_loop() {
        let p = square(5);
        let w = OneForm::parse(&p, &["-x2", "x1"]).unwrap();
        let v = line_integral(&w, &loop_unit(), 4).unwrap();
        assert!((v - 2.0).abs() < 1e-14);
        let degenerate = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        assert_eq!(line_integral(&w, &degenerate, 8).unwrap(), 0.0);
        assert!(matches!(
            line_integral(&w, &[vec![0.0, 0.0], vec![2.0, 0.0]], 4),
            Err(Error::OutsidePatch { .. })
        ));
    }
}
