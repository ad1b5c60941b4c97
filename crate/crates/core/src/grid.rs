//! Rectangular coordinate patches sampled on vertex-centered uniform grids.
//!
//! Nodes are stored in row-major order: the last axis varies fastest.

use crate::error::{Error, Result};

/// Default cap on the number of grid nodes.
pub const DEFAULT_BUDGET: usize = 2_000_000;

/// Minimum points per axis for second-order differencing.
pub const MIN_FD_RESOLUTION: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    bounds: Vec<(f64, f64)>,
    resolution: Vec<usize>,
    strides: Vec<usize>,
}

impl Patch {
    pub fn new(bounds: Vec<(f64, f64)>, resolution: Vec<usize>) -> Result<Patch> {
        Patch::with_budget(bounds, resolution, DEFAULT_BUDGET)
    }

    pub fn with_budget(
        bounds: Vec<(f64, f64)>,
        resolution: Vec<usize>,
        budget: usize,
    ) -> Result<Patch> {
        let dim = bounds.len();
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::InvalidPatch(format!(
                "dimension must be even and positive, got {dim}"
            )));
        }
        if resolution.len() != dim {
            return Err(Error::InvalidPatch(format!(
                "{} resolutions for {dim} axes",
                resolution.len()
            )));
        }
        for (axis, (&(lo, hi), &r)) in bounds.iter().zip(&resolution).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidPatch(format!(
                    "axis {} has bounds [{lo}, {hi}]",
                    axis + 1
                )));
            }
            if r < 2 {
                return Err(Error::InvalidPatch(format!(
                    "axis {} needs at least 2 points",
                    axis + 1
                )));
            }
            let h = (hi - lo) / (r - 1) as f64;
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::InvalidPatch(format!("axis {} spacing {h}", axis + 1)));
            }
        }
        let total = resolution
            .iter()
            .try_fold(1usize, |acc, &r| acc.checked_mul(r))
            .filter(|&t| t <= budget)
            .ok_or_else(|| {
                Error::InvalidPatch(format!("grid exceeds the budget of {budget} nodes"))
            })?;
        debug_assert!(total > 0);
        let mut strides = vec![1; dim];
        for a in (0..dim - 1).rev() {
            strides[a] = strides[a + 1] * resolution[a + 1];
        }
        Ok(Patch {
            bounds,
            resolution,
            strides,
        })
    }

    /// `[lo, hi]^dim` with `r` points per axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, r: usize) -> Result<Patch> {
        Patch::new(vec![(lo, hi); dim], vec![r; dim])
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn dim_half(&self) -> usize {
        self.bounds.len() / 2
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let (lo, hi) = self.bounds[axis];
        (hi - lo) / (self.resolution[axis] - 1) as f64
    }

    /// Coordinate of grid index `i` on `axis`; endpoints are reproduced exactly.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        let (lo, hi) = self.bounds[axis];
        let last = (self.resolution[axis] - 1) as f64;
        let t = i as f64;
        ((last - t) * lo + t * hi) / last
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut rest = flat;
        self.strides
            .iter()
            .map(|&s| {
                let i = rest / s;
                rest %= s;
                i
            })
            .collect()
    }

    pub fn axis_index(&self, flat: usize, axis: usize) -> usize {
        (flat / self.strides[axis]) % self.resolution[axis]
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn point_into(&self, flat: usize, out: &mut [f64]) {
        for (axis, o) in out.iter_mut().enumerate().take(self.dim()) {
            *o = self.coord(axis, self.axis_index(flat, axis));
        }
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.dim()];
        self.point_into(flat, &mut p);
        p
    }

    pub fn is_interior(&self, flat: usize) -> bool {
        (0..self.dim()).all(|a| {
            let i = self.axis_index(flat, a);
            i > 0 && i + 1 < self.resolution[a]
        })
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.is_interior(k)).collect()
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| !self.is_interior(k)).collect()
    }

    pub fn all_nodes(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }

    /// Node closest to `point` (rounding each coordinate to the grid).
    pub fn nearest_node(&self, point: &[f64]) -> Result<usize> {
        if !self.contains(point) {
            return Err(Error::OutsidePatch {
                point: point.to_vec(),
            });
        }
        let idx: Vec<usize> = (0..self.dim())
            .map(|a| {
                let t = (point[a] - self.bounds[a].0) / self.spacing(a);
                (t.round() as usize).min(self.resolution[a] - 1)
            })
            .collect();
        Ok(self.flat_index(&idx))
    }

    /// Membership test with a relative slack of 1e-12 per axis.
    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && self.bounds.iter().zip(point).all(|(&(lo, hi), &x)| {
                let slack = 1e-12 * (hi - lo).abs().max(1.0);
                x >= lo - slack && x <= hi + slack
            })
    }

    /// Fails with [`Error::TooCoarse`] when an axis has fewer than five points.
    pub fn require_fd(&self) -> Result<()> {
        match self
            .resolution
            .iter()
            .position(|&r| r < MIN_FD_RESOLUTION)
        {
            Some(axis) => Err(Error::TooCoarse {
                axis: axis + 1,
                resolution: self.resolution[axis],
            }),
            None => Ok(()),
        }
    }

    /// Same box with `r` points on every axis.
    pub fn with_resolution(&self, r: usize) -> Result<Patch> {
        Patch::new(self.bounds.clone(), vec![r; self.dim()])
    }

    /// Same box with the spacing halved on every axis.
    pub fn refined(&self) -> Result<Patch> {
        Patch::new(
            self.bounds.clone(),
            self.resolution.iter().map(|r| 2 * r - 1).collect(),
        )
    }

    /// Largest spacing over all axes.
    pub fn max_spacing(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).fold(0.0, f64::max)
    }
}
