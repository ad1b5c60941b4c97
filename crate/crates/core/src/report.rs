//! Residual reports shared by every check.

use serde::Serialize;

use crate::field::DiffMode;
use crate::grid::Patch;

/// Tolerance for identities that hold exactly in real arithmetic.
pub const EXACT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EquationResidual {
    pub name: String,
    pub sup_norm: f64,
    pub l2_norm: f64,
}

/// Sup and RMS norms of a pointwise residual over a node set.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ResidualReport {
    pub anchor: String,
    pub mode: DiffMode,
    pub sup_norm: f64,
    pub l2_norm: f64,
    pub worst_node: Vec<usize>,
    pub worst_point: Vec<f64>,
    pub equations: Vec<EquationResidual>,
}

impl ResidualReport {
    /// Builds a report from node-major values: `values[i * names.len() + e]`
    /// is the size of equation `e` at `nodes[i]`.
    pub fn from_values(
        anchor: impl Into<String>,
        mode: DiffMode,
        patch: &Patch,
        nodes: &[usize],
        names: &[&str],
        values: &[f64],
    ) -> ResidualReport {
        let width = names.len().max(1);
        debug_assert_eq!(values.len(), nodes.len() * names.len());
        let mut eq_sup = vec![0.0f64; names.len()];
        let mut eq_sq = vec![0.0f64; names.len()];
        let mut sup = 0.0f64;
        let mut sq = 0.0;
        let mut worst = nodes.first().copied();
        for (i, &k) in nodes.iter().enumerate() {
            let row = &values[i * width..i * width + names.len()];
            let mut node_max = 0.0f64;
            for (e, &v) in row.iter().enumerate() {
                let v = v.abs();
                eq_sup[e] = eq_sup[e].max(v);
                eq_sq[e] += v * v;
                node_max = node_max.max(v);
            }
            // NaN compares false; treat it as the worst possible value
            if node_max > sup || node_max.is_nan() && !sup.is_nan() {
                sup = node_max;
                worst = Some(k);
            }
            sq += node_max * node_max;
        }
        let count = nodes.len().max(1) as f64;
        ResidualReport {
            anchor: anchor.into(),
            mode,
            sup_norm: sup,
            l2_norm: (sq / count).sqrt(),
            worst_node: worst.map(|k| patch.multi_index(k)).unwrap_or_default(),
            worst_point: worst.map(|k| patch.point(k)).unwrap_or_default(),
            equations: names
                .iter()
                .enumerate()
                .map(|(e, n)| EquationResidual {
                    name: n.to_string(),
                    sup_norm: eq_sup[e],
                    l2_norm: (eq_sq[e] / count).sqrt(),
                })
                .collect(),
        }
    }

    /// Single-equation report.
    pub fn scalar(
        anchor: impl Into<String>,
        mode: DiffMode,
        patch: &Patch,
        nodes: &[usize],
        name: &str,
        values: &[f64],
    ) -> ResidualReport {
        ResidualReport::from_values(anchor, mode, patch, nodes, &[name], values)
    }

    /// Combines reports over the same node set by taking the worse of each.
    pub fn merge(anchor: impl Into<String>, parts: &[ResidualReport]) -> ResidualReport {
        let mut out = parts
            .iter()
            .fold(None::<ResidualReport>, |acc, r| match acc {
                Some(a) if a.sup_norm >= r.sup_norm => Some(a),
                _ => Some(r.clone()),
            })
            .expect("at least one report");
        out.anchor = anchor.into();
        out.l2_norm = parts.iter().map(|r| r.l2_norm).fold(0.0, f64::max);
        out.equations = parts.iter().flat_map(|r| r.equations.clone()).collect();
        out
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.sup_norm <= tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sup_and_rms() {
        let p = Patch::cube(2, 0.0, 1.0, 3).unwrap();
        let r = ResidualReport::from_values(
            "t",
            DiffMode::Exact,
            &p,
            &[0, 4, 8],
            &["a", "b"],
            &[1.0, -3.0, 0.0, 0.0, 2.0, 1.0],
        );
        assert_eq!(r.sup_norm, 3.0);
        assert_eq!(r.worst_node, vec![0, 0]);
        assert!((r.l2_norm - (13.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(r.equations[1].sup_norm, 3.0);
    }
}
